use serde::{Deserialize, Serialize};

use super::run::{Injection, ZipperRun};
use crate::error::{Error, Result};
use crate::stats;

/// Runs below which the test has little power and a warning is raised.
pub const MIN_RUNS: usize = 100;
/// Default checkpoints and window, as fractions of each run's quantum time.
pub const CHECKPOINTS: [f64; 3] = [0.0, 0.35, 0.7];
pub const DELTA: f64 = 0.3;
/// Family-wise level of the pairwise tests.
pub const KS_LEVEL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsPair {
    pub a: usize,
    pub b: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Checkpoints and window length as fractions of each run's quantum time.
    pub checkpoints: Vec<f64>,
    pub delta: f64,
    pub runs_used: usize,
    /// Boundary length per unit quantum time over each window, per run.
    pub samples: Vec<Vec<f64>>,
    pub pairs: Vec<KsPair>,
    /// Bonferroni-corrected level applied to each pair.
    pub level: f64,
    pub rejected: bool,
    pub power_warning: bool,
}

/// Boundary length gained per unit quantum time over `[q, q + δ]`, with
/// both in units of the run's total quantum time. A ratio of two masses, so
/// unchanged by adding a constant to the field.
pub fn window_rate(run: &ZipperRun, q: f64, delta: f64, injection: Option<Injection>) -> f64 {
    let total = run.quantum_time(injection);
    let c = [run.capacity_at(q * total, injection), run.capacity_at((q + delta) * total, injection)];
    let m = run.masses_at(&c, injection);
    (m[1].1 - m[0].1) / (m[1].0 - m[0].0)
}

/// Pairwise two-sample KS tests of [`window_rate`] across checkpoints.
pub fn stationarity_diagnostic(runs: &[ZipperRun], checkpoints: &[f64], delta: f64) -> Result<StationarityReport> {
    stationarity_diagnostic_with(runs, checkpoints, delta, None)
}

/// [`stationarity_diagnostic`] after multiplying the field by a constant past a
/// quantum-time fraction, as a positive control. `injection.after` is read
/// as a fraction of each run's quantum time.
pub fn stationarity_diagnostic_with(
    runs: &[ZipperRun],
    checkpoints: &[f64],
    delta: f64,
    injection: Option<Injection>,
) -> Result<StationarityReport> {
    if checkpoints.len() < 2 {
        return Err(Error::Precondition("need at least two checkpoints".into()));
    }
    if !(delta > 0.0) || checkpoints.iter().any(|&q| !(q >= 0.0 && q + delta <= 1.0 + 1e-12)) {
        return Err(Error::Precondition("checkpoint windows must lie in [0, 1]".into()));
    }
    let kept: Vec<&ZipperRun> = runs.iter().filter(|r| !r.is_dropped()).collect();
    let samples: Vec<Vec<f64>> = checkpoints
        .iter()
        .map(|&q| {
            kept.iter()
                .map(|r| {
                    let inj = injection.map(|i| Injection { after: r.capacity_at(i.after * r.quantum_time(None), None), ..i });
                    window_rate(r, q, delta, inj)
                })
                .filter(|v| v.is_finite())
                .collect()
        })
        .collect();
    let k = checkpoints.len();
    let level = KS_LEVEL / (k * (k - 1) / 2) as f64;
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let (x, y) = (&samples[a], &samples[b]);
            let statistic = stats::ks_statistic(x, y);
            let p_value = stats::ks_pvalue(statistic, x.len(), y.len());
            pairs.push(KsPair { a, b, statistic, p_value, rejected: p_value < level });
        }
    }
    Ok(StationarityReport {
        checkpoints: checkpoints.to_vec(),
        delta,
        runs_used: kept.len(),
        rejected: pairs.iter().any(|p| p.rejected),
        power_warning: kept.len() < MIN_RUNS,
        samples,
        pairs,
        level,
    })
}
