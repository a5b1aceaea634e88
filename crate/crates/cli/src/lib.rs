//! Command-line experiments over the `commonspace` library.

pub mod args;
pub mod commands;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser};
use serde_json::Value;

use args::{Cli, Command};
use commands::RunContext;

/// Bad flag values detected after parsing; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Value of `--config` in `argv`, if any.
fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Turns a JSON object of flag values into arguments, skipping flags already in `argv`.
fn config_args(path: &str, argv: &[String]) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let Value::Object(map) = v else {
        bail!(UsageError(format!("config {path} must hold a JSON object")))
    };
    let mut out = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if argv
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
        {
            continue;
        }
        let scalar = |v: &Value| -> Result<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Bool(b) => Ok(b.to_string()),
                other => bail!(UsageError(format!(
                    "config key {key:?}: unsupported value {other}"
                ))),
            }
        };
        match &value {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    out.push(flag.clone());
                    out.push(scalar(item)?);
                }
            }
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok(out)
}

/// Inserts config-derived arguments right after the subcommand name.
fn with_config(argv: &[String]) -> Result<Vec<String>> {
    let Some(path) = config_path(argv) else {
        return Ok(argv.to_vec());
    };
    let extra = config_args(&path, argv)?;
    let names: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let pos = argv
        .iter()
        .skip(1)
        .position(|a| names.contains(a))
        .map(|p| p + 2)
        .unwrap_or(argv.len());
    let mut out = argv[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos..]);
    Ok(out)
}

fn dispatch(argv: &[String]) -> Result<()> {
    let started = Instant::now();
    let expanded = with_config(argv)?;
    let cli = match Cli::try_parse_from(expanded.iter().map(OsString::from)) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            e.print().ok();
            return Err(ClapExit(code).into());
        }
    };
    let mut echo = argv.to_vec();
    if let Some(first) = echo.first_mut() {
        *first = "commonspace".into();
    }
    let ctx = RunContext {
        argv: &echo,
        global: &cli.global,
        config: serde_json::to_value(&cli)?,
        started,
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::TrainReference(a) => commands::train_reference(&ctx, a),
        Command::Align(a) => commands::align(&ctx, a),
        Command::Select(a) => commands::select(&ctx, a),
        Command::Metrics(a) => commands::metrics(&ctx, a),
        Command::CoverageTest(a) => commands::coverage_test(&ctx, a),
        Command::Extremes(a) => commands::extremes(&ctx, a),
    }
}

#[derive(Debug, thiserror::Error)]
#[error("argument parsing finished with status {0}")]
struct ClapExit(i32);

/// Runs the CLI on `argv` (program name first) and returns the process exit status.
pub fn run(argv: &[String]) -> i32 {
    match dispatch(argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if let Some(ClapExit(code)) = e.downcast_ref::<ClapExit>() {
                return *code;
            }
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
