use std::sync::Arc;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::measure::{AtomicMeasure, Support};
use crate::error::{Error, Result};
use crate::field::{probe_moments, q_of, sample_probes, CovarianceModel, Probe, ProbeSet, Regime};
use crate::loewner::PlaneMap;
use crate::stats::{self, LinearFit};

/// Exponent of `|φ'|` picked up by the boundary Liouville measure under a
/// coordinate change; zero for every `γ`.
pub fn boundary_exponent(gamma: f64) -> f64 {
    gamma * gamma / 4.0 - 0.5 * gamma * q_of(gamma) + 1.0
}

/// Same exponent for the quantum natural time on a curve, where the extra
/// `γ²/8` comes from the `d`-dimensional reference measure.
pub fn curve_exponent(gamma: f64) -> f64 {
    gamma * gamma / 8.0 - 0.5 * gamma * q_of(gamma) + 1.0 + gamma * gamma / 8.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub eps: f64,
    /// Per-atom log-ratio of the image-side weight to the source-side weight.
    pub log_ratio: Vec<f64>,
    pub median_abs: f64,
}

/// Compares the boundary measure `e^{(γ/2)h} dx` on `[a, b]` with the
/// measure of the transformed field `h ∘ φ⁻¹ + Q log|(φ⁻¹)'|` on the image,
/// pulled back by `φ`. Scales are matched, `ε` against `ε|φ'(x)|`, and both
/// sides use one joint field sample.
pub fn invariance_check(
    map: Arc<dyn PlaneMap>,
    inverse: Arc<dyn PlaneMap>,
    model: &CovarianceModel,
    reference: &AtomicMeasure,
    gamma: f64,
    gamma_tilde: f64,
    eps: f64,
    seed: u64,
) -> Result<InvarianceReport> {
    if (gamma_tilde - gamma / 2.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("invariance needs gamma_tilde = gamma/2, got {gamma_tilde} with gamma {gamma}")));
    }
    if reference.support != Support::Boundary {
        return Err(Error::Precondition("invariance check runs on boundary measures".into()));
    }
    let n = reference.len();
    let mut probes = Vec::with_capacity(2 * n);
    let mut logd = Vec::with_capacity(n);
    for a in &reference.atoms {
        probes.push(Probe::boundary(a.position.re, eps));
    }
    for a in &reference.atoms {
        let e = map.eval(a.position)?;
        if e.value.im != 0.0 || e.landed.is_some() {
            return Err(Error::Domain(format!("{} is not mapped to the boundary", a.position)));
        }
        let ld = e.deriv.norm().ln();
        logd.push(ld);
        probes.push(Probe::boundary(e.value.re, eps * ld.exp()).pulled_back(inverse.clone()));
    }
    let set = ProbeSet::new(probes).with_offset(q_of(gamma));
    let (cov, mean) = probe_moments(model, &set)?;
    let p = sample_probes(&cov, &mean, seed)?.values;
    let power = gamma * gamma / 4.0 + 1.0;
    let log_ratio: Vec<f64> = (0..n).map(|i| 0.5 * gamma * (p[n + i] - p[i]) + power * logd[i]).collect();
    let abs: Vec<f64> = log_ratio.iter().map(|v| v.abs()).collect();
    Ok(InvarianceReport { eps, median_abs: stats::median(&abs), log_ratio })
}

/// Regression of the chaos weight at scale `ε/2` on the weight at scale `ε`
/// for a single probe centre; a martingale in the scale has slope 1.
pub fn martingale_slope(
    model: &CovarianceModel,
    centre: C,
    regime: Regime,
    gamma_tilde: f64,
    eps: f64,
    replicates: usize,
    seed: u64,
) -> Result<LinearFit> {
    let half = eps / 2.0;
    let probe = |e| match regime {
        Regime::Bulk => Probe::bulk(centre, e),
        Regime::Boundary => Probe::boundary(centre.re, e),
    };
    let (cov, mean) = probe_moments(model, &ProbeSet::new(vec![probe(eps), probe(half)]))?;
    let sampler = crate::field::GaussianSampler::new(&cov, mean)?;
    let n = regime.log_order();
    let g = gamma_tilde;
    let mut rng = crate::seed::rng(seed);
    let (mut out, mut z) = ([0.0; 2], [0.0; 2]);
    let (mut x, mut y) = (Vec::with_capacity(replicates), Vec::with_capacity(replicates));
    for _ in 0..replicates {
        sampler.sample_into(&mut rng, &mut out, &mut z);
        x.push((g * out[0] + 0.5 * g * g * n * eps.ln()).exp());
        y.push((g * out[1] + 0.5 * g * g * n * half.ln()).exp());
    }
    Ok(stats::linear_fit(&x, &y))
}
