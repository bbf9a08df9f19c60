//! One module per experiment. Each reads its parameters with defaults,
//! writes its files through [`Output`] and reports what it sampled.

mod field;
mod natural;
mod trace;
mod zipper;

use slelab::field::{CovarianceModel, DiskRho, Regime};

use crate::config::{Experiment, ExperimentConfig, WindowSpec};
use crate::output::Output;

/// What a run produced besides its files.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub seeds: serde_json::Value,
    pub replicates: usize,
    /// Replicates excluded with the reason.
    pub flagged: Vec<(usize, String)>,
    pub summary: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunError {
    /// Rejected parameters, reported as a configuration problem.
    Invalid(String),
    /// A numerical stage failed outright.
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid parameters: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl From<slelab::Error> for RunError {
    fn from(e: slelab::Error) -> Self {
        use slelab::Error as E;
        match e {
            E::UnsupportedParameter(_) | E::Precondition(_) | E::Subcritical(_) | E::InvalidGrid(_) | E::TimeOutOfRange(_) => {
                RunError::Invalid(e.to_string())
            }
            E::Io(m) => RunError::Io(m),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

pub fn run(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    match config.experiment {
        Experiment::SleTrace => trace::run(config, out),
        Experiment::GffProbes => field::probes(config, out),
        Experiment::Gmc => field::gmc(config, out),
        Experiment::Minkowski => natural::minkowski(config, out),
        Experiment::NaturalParam => natural::natural_param(config, out),
        Experiment::Zipper => zipper::zipper(config, out),
        Experiment::MarkovCheck => zipper::markov(config, out),
    }
}

fn regime(config: &ExperimentConfig, default: Regime) -> Regime {
    match config.params.regime.as_deref() {
        Some("bulk") => Regime::Bulk,
        Some("boundary") => Regime::Boundary,
        _ => default,
    }
}

fn field_model(config: &ExperimentConfig, regime: Regime) -> CovarianceModel {
    let default = match regime {
        Regime::Bulk => "dirichlet",
        Regime::Boundary => "neumann",
    };
    match config.params.field.as_deref().unwrap_or(default) {
        "neumann" => CovarianceModel::neumann(DiskRho::standard(0.0)),
        _ => CovarianceModel::dirichlet(),
    }
}

fn window(config: &ExperimentConfig, default: WindowSpec) -> WindowSpec {
    config.window.unwrap_or(default)
}

/// `2^{-lo}, …, 2^{-hi}`.
fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}
