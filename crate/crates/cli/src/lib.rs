//! Batch driver for the SLE experiments.
//!
//! `slelab <experiment> --config <path> [--seed N] [--replicates N] [--out DIR] [--set key=value]...`
//! writes `manifest.json`, `results/*.csv|json` and `plot/*.dat` under the
//! output directory. Exit status is 0 on success, 2 for an invalid
//! configuration and 3 when more than half of the replicates were flagged
//! or a numerical stage failed.

pub mod config;
mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use config::{ConfigError, Experiment, ExperimentConfig, Params, WindowSpec};
pub use experiments::{Outcome, RunError};
pub use output::{manifest_hash, RunManifest, CODE_VERSION, SCHEMA_VERSION};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "SLELAB_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "slelab", version, about = "Run an SLE / quantum zipper experiment")]
struct Cli {
    experiment: Experiment,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any configuration key, e.g. `params.kappa=2` or `window.radius=0.8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// A failed run with its exit status.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::new(EXIT_INVALID, format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs a validated configuration on a pool of `workers` threads (all cores
/// when `None`) and writes the manifest. Results do not depend on the
/// worker count.
pub fn run(config: &ExperimentConfig, workers: Option<usize>) -> Result<RunManifest, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    let hash = manifest_hash(config);
    let mut out = output::Output::create(&config.out, hash.clone())
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot create {}: {e}", config.out.display())))?;
    let start = Instant::now();
    let outcome = pool.install(|| experiments::run(config, &mut out)).map_err(|e| {
        let code = match e {
            RunError::Invalid(_) => EXIT_INVALID,
            RunError::Numerical(_) => EXIT_NUMERICAL,
            RunError::Io(_) => EXIT_IO,
        };
        Failure::new(code, e.to_string())
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = out
        .finish(|outputs| RunManifest {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            manifest_hash: hash,
            config: config.clone(),
            seeds: outcome.seeds,
            replicates: outcome.replicates,
            excluded: outcome.flagged.len(),
            exclusion_reasons: outcome.flagged,
            summary: outcome.summary,
            workers: pool.current_num_threads(),
            wall_clock_seconds: elapsed,
            outputs,
        })
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    if 2 * manifest.excluded > manifest.replicates {
        return Err(Failure::new(
            EXIT_NUMERICAL,
            format!("{} of {} replicates flagged", manifest.excluded, manifest.replicates),
        ));
    }
    Ok(manifest)
}

/// Full command-line entry point; returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(m) => {
            println!("{}: {} replicates, {} excluded, manifest {}", m.config.experiment, m.replicates, m.excluded, m.manifest_hash);
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli) -> Result<RunManifest, Failure> {
    let mut overrides = Vec::new();
    for s in &cli.set {
        overrides.push(config::parse_override(s).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?);
    }
    if let Some(seed) = cli.seed {
        let v = i64::try_from(seed).map_err(|_| Failure::new(EXIT_INVALID, "flag --seed: seed must fit in 63 bits"))?;
        overrides.push(("seed".into(), toml::Value::Integer(v)));
    }
    if let Some(n) = cli.replicates {
        overrides.push(("replicates".into(), toml::Value::Integer(n as i64)));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), toml::Value::String(out.display().to_string())));
    }
    let config = ExperimentConfig::load(cli.config.as_deref(), Some(cli.experiment), &overrides)
        .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    run(&config, workers_from_env()?)
}
