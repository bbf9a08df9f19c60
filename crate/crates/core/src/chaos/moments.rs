use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Fewest replicates accepted by [`moment_estimate`].
pub const MIN_REPLICATES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: f64,
    pub estimate: f64,
    /// Hill estimate of the upper tail index.
    pub tail_index: f64,
    /// Raised when the tail index does not exceed the order.
    pub heavy_tail: bool,
}

/// Empirical `m`-th moment of replicate masses with a Hill tail check over
/// the top 5% of the sample.
pub fn moment_estimate(masses: &[f64], order: f64) -> Result<MomentEstimate> {
    if masses.len() < MIN_REPLICATES {
        return Err(Error::Precondition(format!(
            "{} replicates given, at least {MIN_REPLICATES} needed",
            masses.len()
        )));
    }
    if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::Precondition("masses must be finite and non-negative".into()));
    }
    let estimate = masses.iter().map(|m| m.powf(order)).sum::<f64>() / masses.len() as f64;
    let k = (masses.len() / 20).max(10);
    let tail_index = stats::hill_index(masses, k);
    Ok(MomentEstimate { order, estimate, tail_index, heavy_tail: tail_index < order })
}
