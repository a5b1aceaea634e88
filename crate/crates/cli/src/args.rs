//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commonspace::adapters::{AdapterKind, TrainMode};
use commonspace::synth::Transform;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "commonspace",
    version,
    about = "Cross-subject alignment and coverage-based selection experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Seed for every random draw the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the summary printed to stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic multi-subject benchmark directory.
    Simulate(SimulateArgs),
    /// Train the reference subject's adapter and mapper.
    TrainReference(TrainReferenceArgs),
    /// Fine-tune a new subject against the reference.
    Align(AlignArgs),
    /// Greedy coverage selection over the common items.
    Select(SelectArgs),
    /// Cross-subject similarity metrics on common items.
    Metrics(MetricsArgs),
    /// Permutation test of a selection's empty-bin count.
    CoverageTest(CoverageTestArgs),
    /// Items at both ends of one principal direction.
    Extremes(ExtremesArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Standard,
    StandardOrthogonal,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformArg {
    Orthogonal,
    InvertibleLinear,
    TallLinear,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Orthogonal => Transform::Orthogonal,
            TransformArg::InvertibleLinear => Transform::InvertibleLinear,
            TransformArg::TallLinear => Transform::TallLinear,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "standard")]
    pub preset: Preset,
    #[arg(long)]
    pub n_subjects: Option<usize>,
    #[arg(long)]
    pub n_common: Option<usize>,
    #[arg(long)]
    pub n_unique: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub subject_dim: Option<usize>,
    #[arg(long)]
    pub target_dim: Option<usize>,
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub n_categories: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ArchArgs {
    #[arg(long, default_value = "linear", value_parser = parse_kind)]
    pub adapter_kind: AdapterKind,
    #[arg(long, default_value_t = 32)]
    pub common_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub adapter_hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub mapper_hidden: usize,
    /// Force the mapper residual on or off.
    #[arg(long)]
    pub residual: Option<bool>,
}

fn parse_kind(s: &str) -> Result<AdapterKind, String> {
    s.parse().map_err(|e: commonspace::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    s.parse().map_err(|e: commonspace::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct TrainReferenceArgs {
    /// Benchmark directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "1")]
    pub subject: String,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[command(flatten)]
    pub arch: ArchArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory written by train-reference.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value = "2")]
    pub subject: String,
    /// baseline, aamax, step1 or frozen-mapper.
    #[arg(long, default_value = "aamax", value_parser = parse_mode)]
    pub mode: TrainMode,
    /// Train on at most this many common items.
    #[arg(long)]
    pub common_limit: Option<usize>,
    /// Selection JSON whose chosen items replace the leading common items.
    #[arg(long)]
    pub select: Option<PathBuf>,
    /// Also train on the subject's unique items.
    #[arg(long)]
    pub include_unique: bool,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda3: f64,
    #[arg(long, default_value_t = 2000)]
    pub stage1_epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub stage1_lr: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub stage1_tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Principal dimensions.
    #[arg(long, default_value_t = 20)]
    pub dims: usize,
    /// Bins along the leading dimension.
    #[arg(long, default_value_t = 50)]
    pub w: usize,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated subject ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub subjects: Vec<String>,
    /// `ID=adapter.json`; the subject's common items are mapped through it.
    #[arg(long = "adapter", value_parser = parse_pair)]
    pub adapters: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = 50)]
    pub knn_k: usize,
    #[arg(long, default_value_t = 5)]
    pub eig_k: usize,
    #[arg(long)]
    pub center: bool,
}

fn parse_pair(s: &str) -> Result<(String, PathBuf), String> {
    let (id, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected ID=PATH, got {s:?}"))?;
    Ok((id.to_string(), PathBuf::from(path)))
}

#[derive(Debug, Args, Serialize)]
pub struct CoverageTestArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Selection JSON written by `select`.
    #[arg(long)]
    pub selection: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Random subset size; defaults to the selection size.
    #[arg(long)]
    pub subset_size: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtremesArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub dims: usize,
    #[arg(long, default_value_t = 0)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}
