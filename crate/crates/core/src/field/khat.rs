use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::cov::{pair, Prepared};
use super::model::{CovarianceModel, Regime};
use super::probe::Probe;
use crate::error::{Error, Result};

/// Default scale schedule for `K̂`.
pub const KHAT_SCHEDULE: [f64; 2] = [1e-2, 5e-3];
/// Successive estimates closer than this count as converged.
pub const KHAT_TOL: f64 = 5e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhatEstimate {
    pub value: f64,
    /// `(ε, Var(θ^ε) + n log ε)` along the schedule.
    pub estimates: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Variance of a single unmapped probe.
pub fn probe_variance(model: &CovarianceModel, centre: C, eps: f64, regime: Regime) -> Result<f64> {
    let p = Prepared::build(model, &Probe::new(centre, eps, regime))?;
    Ok(pair(model, &p, &p, true))
}

/// Renormalised variance without the convergence requirement.
pub fn khat_estimates(model: &CovarianceModel, z: C, regime: Regime, schedule: &[f64]) -> Result<KhatEstimate> {
    if schedule.len() < 2 {
        return Err(Error::Precondition("K̂ needs at least two scales".into()));
    }
    let n = regime.log_order();
    let estimates = schedule
        .iter()
        .map(|&e| Ok((e, probe_variance(model, z, e, regime)? + n * e.ln())))
        .collect::<Result<Vec<_>>>()?;
    let k = estimates.len();
    let diff = (estimates[k - 1].1 - estimates[k - 2].1).abs();
    Ok(KhatEstimate { value: estimates[k - 1].1, estimates, converged: diff < KHAT_TOL })
}

/// `K̂(z) = lim Var(θ_z^ε) + n log ε`, with `n = 1` in the bulk and `n = 2`
/// on the boundary.
pub fn khat(model: &CovarianceModel, z: C, regime: Regime, schedule: &[f64]) -> Result<KhatEstimate> {
    let est = khat_estimates(model, z, regime, schedule)?;
    if !est.converged {
        let k = est.estimates.len();
        return Err(Error::ScheduleTooCoarse((est.estimates[k - 1].1 - est.estimates[k - 2].1).abs()));
    }
    Ok(est)
}
