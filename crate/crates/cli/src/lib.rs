//! Command-line front end: configuration loading, experiment orchestration
//! and result files.
//!
//! Exit codes: 0 success, 1 invalid input, 2 a flagged statistic,
//! 3 a simulation that broke down (explosion, non-finite or non-positive state).

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{ExperimentConfig, ModeSpec};
use crate::error::CliError;

pub const THREADS_ENV: &str = "SEPMP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sepmp", version, about = "Monte Carlo toolkit for control of self-exciting jump SDEs")]
pub struct Cli {
    /// Experiment configuration (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Inner paths per nested conditional expectation.
    #[arg(long, global = true)]
    inner_paths: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Mark measurability mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeSpec>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate event and state paths.
    Simulate,
    /// Statistical checks of the event process.
    Verify {
        #[command(subcommand)]
        check: Check,
    },
    /// The log-utility problem.
    Logutil {
        #[command(subcommand)]
        task: Logutil,
    },
    /// Directional derivatives of the performance functional.
    Gradient,
}

#[derive(Debug, Subcommand)]
enum Check {
    /// Mean and variance of N_T with no self-excitation.
    Poisson,
    /// Martingale property of the compensated U and [U].
    Martingale,
    /// Realized covariation identities.
    Covariation,
}

#[derive(Debug, Subcommand)]
enum Logutil {
    /// Optimal control curve and first-order condition checks.
    Solve,
    /// Paired comparison of the optimal control against rivals.
    Compare,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify { check: Check::Poisson } => "verify poisson",
            Command::Verify { check: Check::Martingale } => "verify martingale",
            Command::Verify { check: Check::Covariation } => "verify covariation",
            Command::Logutil { task: Logutil::Solve } => "logutil solve",
            Command::Logutil { task: Logutil::Compare } => "logutil compare",
            Command::Gradient => "gradient",
        }
    }
}

/// Runs the CLI with the worker count taken from `SEPMP_THREADS`.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return 1;
            }
        },
        Err(_) => None,
    };
    run_cli_with_threads(args, threads)
}

pub fn run_cli_with_threads<I, T>(args: I, threads: Option<usize>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(flagged) => {
            if flagged {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.paths {
        cfg.mc.paths = n;
    }
    if let Some(n) = cli.inner_paths {
        cfg.mc.inner_paths = n;
    }
    if let Some(s) = cli.seed {
        cfg.mc.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = cli.mode {
        cfg.set_mode(m);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Returns whether any statistic was flagged.
fn run(cli: &Cli) -> Result<bool, CliError> {
    let started = Instant::now();
    let cfg = effective_config(cli)?;
    let outcome = match &cli.command {
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Verify { check: Check::Poisson } => commands::verify_poisson(&cfg)?,
        Command::Verify { check: Check::Martingale } => commands::verify_martingale(&cfg)?,
        Command::Verify { check: Check::Covariation } => commands::verify_covariation(&cfg)?,
        Command::Logutil { task: Logutil::Solve } => commands::logutil_solve(&cfg)?,
        Command::Logutil { task: Logutil::Compare } => commands::logutil_compare(&cfg)?,
        Command::Gradient => commands::gradient(&cfg)?,
    };
    let summary = json!({
        "command": cli.command.name(),
        "config_hash": cfg.hash(),
        "seed": cfg.mc.master_seed,
        "version": version_string(),
        "status": if outcome.flagged { "flagged" } else { "ok" },
        "results": outcome.results,
        "wall_time": started.elapsed().as_secs_f64(),
    });
    let dir = &cfg.output_dir;
    write_file(dir, "config.json", cfg.to_json().as_bytes())?;
    for (name, bytes) in &outcome.files {
        write_file(dir, name, bytes)?;
    }
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Serialize(e.to_string()))?;
    text.push('\n');
    write_file(dir, "summary.json", text.as_bytes())?;
    println!("{}: {} ({})", cli.command.name(), summary["status"].as_str().unwrap_or(""), dir.display());
    Ok(outcome.flagged)
}

fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io { path, source: e })
}
