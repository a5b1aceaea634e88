fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(commonspace_cli::run(&argv));
}
