//! Discrete Loewner evolution driven by piecewise-constant functions.

mod chain;
mod driving;
mod maps;
mod slit;
mod trace;

pub use chain::{MapChain, MapEval};
pub use driving::{sample_sle_driving, DrivingPath};
pub use maps::{Compose, PlaneMap, Similarity, Unzip, Zip};
pub use slit::Slit;
pub use trace::{compute_trace, grid_times, hull_trace, hull_trace_to_exit, tip, trace_of_chain, TraceSample, EPS_LIFT};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Default time step.
pub const DT: f64 = 1e-3;

/// `g_T(z)` for the whole chain.
pub fn solve_forward(chain: &MapChain, z: C) -> Result<C> {
    Ok(chain.forward(z, 0.0, chain.horizon())?.value)
}

/// `(φ_s^t(z), (φ_s^t)'(z))`.
pub fn unzip_map(chain: &MapChain, s: f64, t: f64, z: C) -> Result<(C, C)> {
    let e = chain.unzip(z, s, t)?;
    Ok((e.value, e.deriv))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CapacityReport {
    /// Richardson-extrapolated half-plane capacity.
    pub estimate: f64,
    /// Sum of piece durations.
    pub horizon: f64,
    /// Radius `R` of the smaller of the two evaluation points `iR`, `2iR`.
    pub radius: f64,
    pub abs_error: f64,
}

/// Half-plane capacity read off `g(z) - z ~ 2a/z` at `iR` and `2iR`.
///
/// `radius` defaults to `10³` times a hull diameter estimate.
pub fn hull_capacity_check(chain: &MapChain, radius: Option<f64>) -> Result<CapacityReport> {
    let horizon = chain.horizon();
    if chain.is_empty() {
        return Ok(CapacityReport { estimate: 0.0, horizon, radius: radius.unwrap_or(0.0), abs_error: 0.0 });
    }
    let diam = chain
        .hull_interval(0.0, horizon)?
        .map_or(0.0, |(lo, hi)| hi - lo)
        .max(horizon.sqrt())
        + chain.max_abs_drive();
    let r = radius.unwrap_or(1e3 * diam);
    let a = |r: f64| {
        // Accumulate g(z) - z increment by increment to keep it exact-ish.
        let z0 = C::new(0.0, r);
        let mut z = z0;
        let mut inc = C::new(0.0, 0.0);
        for s in chain.steps() {
            let (w, _) = s.forward(z);
            inc += 4.0 * s.cap / ((z - s.drive) + slit_root(z, s));
            z = w;
        }
        (inc * z0 / 2.0).re
    };
    let est = 2.0 * a(2.0 * r) - a(r);
    Ok(CapacityReport { estimate: est, horizon, radius: r, abs_error: (est - horizon).abs() })
}

fn slit_root(z: C, s: &Slit) -> C {
    let u = z - s.drive;
    let q = (u * u + 4.0 * s.cap).sqrt();
    if q.im < 0.0 {
        -q
    } else {
        q
    }
}
