use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::AtomicMeasure;
use crate::error::{Error, Result};
use crate::field::{khat, KHAT_SCHEDULE, probe_moments, CovarianceModel, FieldSample, GaussianSampler, Probe, ProbeSet, Regime};
use crate::seed::{self, seed_for};
use crate::stats;

/// Parameters of a chaos measure `:e^{γ̃ h} σ:`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmcSpec {
    pub gamma_tilde: f64,
    pub regime: Regime,
    pub eps_schedule: Vec<f64>,
}

impl GmcSpec {
    pub fn new(gamma_tilde: f64, regime: Regime, eps_schedule: Vec<f64>) -> Self {
        Self { gamma_tilde, regime, eps_schedule }
    }

    /// Bulk chaos needs `γ̃ < √(2d)`, boundary chaos `γ̃ < √d`.
    pub fn validate(&self, dim: f64) -> Result<()> {
        let bound = match self.regime {
            Regime::Bulk => (2.0 * dim).sqrt(),
            Regime::Boundary => dim.sqrt(),
        };
        if !(self.gamma_tilde >= 0.0 && self.gamma_tilde < bound) {
            return Err(Error::Subcritical(format!(
                "gamma_tilde = {} must lie in [0, {bound}) for dimension {dim}",
                self.gamma_tilde
            )));
        }
        if self.eps_schedule.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Precondition("scales must be positive".into()));
        }
        Ok(())
    }

    /// `log` of the renormalisation `ε^{γ̃²/2}` (bulk) or `ε^{γ̃²}` (boundary).
    pub fn log_renorm(&self, eps: f64) -> f64 {
        0.5 * self.gamma_tilde * self.gamma_tilde * self.regime.log_order() * eps.ln()
    }

    /// Weight multiplier for a pairing value `p` at scale `eps`.
    #[inline]
    pub fn factor(&self, p: f64, eps: f64) -> f64 {
        (self.gamma_tilde * p + self.log_renorm(eps)).exp()
    }
}

/// Probe of the regime's shape centred at an atom.
pub fn probe_at(regime: Regime, position: C, eps: f64) -> Probe {
    match regime {
        Regime::Bulk => Probe::bulk(position, eps),
        Regime::Boundary => Probe::boundary(position.re, eps),
    }
}

/// Probes at every atom of `reference` at scale `eps`.
pub fn probes_for(reference: &AtomicMeasure, regime: Regime, eps: f64) -> ProbeSet {
    ProbeSet::new(reference.atoms.iter().map(|a| probe_at(regime, a.position, eps)).collect())
}

fn check_alignment(reference: &AtomicMeasure, pairings: &FieldSample, eps: f64) -> Result<()> {
    if pairings.values.len() != reference.len() {
        return Err(Error::Alignment(format!("{} pairings for {} atoms", pairings.values.len(), reference.len())));
    }
    if let Some(keys) = &pairings.probes {
        for (a, (c, e)) in reference.atoms.iter().zip(keys) {
            let same_place = (a.position - c).norm() <= 1e-12 * (1.0 + a.position.norm());
            if !same_place || (e - eps).abs() > 1e-12 * eps {
                return Err(Error::Alignment(format!("probe ({c}, {e}) does not sit on atom {} at scale {eps}", a.position)));
            }
        }
    }
    Ok(())
}

/// Chaos weights `w · e^{γ̃ P} · ε^{γ̃²/2·n}` with `n = 1` (bulk) or `2`
/// (boundary).
pub fn gmc_measure(reference: &AtomicMeasure, pairings: &FieldSample, eps: f64, spec: &GmcSpec) -> Result<AtomicMeasure> {
    spec.validate(reference.dim)?;
    check_alignment(reference, pairings, eps)?;
    let w: Vec<f64> = reference
        .atoms
        .iter()
        .zip(&pairings.values)
        .map(|(a, p)| a.weight * spec.factor(*p, eps))
        .collect();
    Ok(reference.with_weights(&w))
}

/// Exact inverse of [`gmc_measure`].
pub fn recover_reference(chaos: &AtomicMeasure, pairings: &FieldSample, eps: f64, spec: &GmcSpec) -> Result<AtomicMeasure> {
    check_alignment(chaos, pairings, eps)?;
    let w: Vec<f64> = chaos
        .atoms
        .iter()
        .zip(&pairings.values)
        .map(|(a, p)| a.weight / spec.factor(*p, eps))
        .collect();
    Ok(chaos.with_weights(&w))
}

/// `E μ = ∫ e^{(γ̃²/2) K̂} dσ` over the whole reference.
pub fn expected_mass(model: &CovarianceModel, reference: &AtomicMeasure, spec: &GmcSpec) -> Result<f64> {
    expected_mass_in(model, reference, spec, |_| true)
}

/// `E μ(region)` as a deterministic sum over the atoms in `region`; `K̂`
/// uses its own fine scale schedule, independent of the chaos scales.
pub fn expected_mass_in<F>(model: &CovarianceModel, reference: &AtomicMeasure, spec: &GmcSpec, region: F) -> Result<f64>
where
    F: Fn(C) -> bool + Sync,
{
    spec.validate(reference.dim)?;
    let g2 = spec.gamma_tilde * spec.gamma_tilde;
    let terms = reference
        .atoms
        .par_iter()
        .filter(|a| region(a.position))
        .map(|a| {
            if g2 == 0.0 {
                return Ok(a.weight);
            }
            let z = match spec.regime {
                Regime::Bulk => a.position,
                Regime::Boundary => C::new(a.position.re, 0.0),
            };
            let k = khat(model, z, spec.regime, &KHAT_SCHEDULE)?;
            Ok(a.weight * (0.5 * g2 * k.value).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// Total masses of independent replicates at a single scale.
pub fn gmc_total_masses(
    model: &CovarianceModel,
    reference: &AtomicMeasure,
    spec: &GmcSpec,
    eps: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate(reference.dim)?;
    let (cov, means) = probe_moments(model, &probes_for(reference, spec.regime, eps))?;
    let sampler = GaussianSampler::new(&cov, means)?;
    let base: Vec<f64> = reference.atoms.iter().map(|a| a.weight).collect();
    Ok((0..replicates)
        .into_par_iter()
        .map_init(
            || (vec![0.0; base.len()], vec![0.0; base.len()]),
            |(out, z), r| {
                let mut rng = seed::rng(seed_for(seed, r as u64));
                sampler.sample_into(&mut rng, out, z);
                base.iter().zip(out.iter()).map(|(w, p)| w * spec.factor(*p, eps)).sum()
            },
        )
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Total mass at each scale of the schedule.
    pub total_mass: Vec<f64>,
    /// Per atom: change of the cumulative mass up to that atom between the
    /// last two scales, relative to the total mass at the coarser one.
    pub cumulative_change: Vec<f64>,
    pub median_change: f64,
    pub converged: bool,
}

/// Median relative change below which a chaos sample counts as converged.
pub const GMC_CONVERGENCE_TOL: f64 = 0.05;

/// One field sample probed jointly at every scale of the schedule, with a
/// Cauchy diagnostic between the last two scales.
pub fn gmc_converged(model: &CovarianceModel, reference: &AtomicMeasure, spec: &GmcSpec, seed: u64) -> Result<ConvergenceReport> {
    Ok(gmc_converged_many(model, reference, spec, &[seed])?.remove(0))
}

/// [`gmc_converged`] for several seeds, sharing one covariance factor.
pub fn gmc_converged_many(
    model: &CovarianceModel,
    reference: &AtomicMeasure,
    spec: &GmcSpec,
    seeds: &[u64],
) -> Result<Vec<ConvergenceReport>> {
    spec.validate(reference.dim)?;
    if spec.eps_schedule.len() < 3 {
        return Err(Error::Precondition("convergence diagnostics need at least three scales".into()));
    }
    if spec.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("scale schedule must be decreasing".into()));
    }
    let n = reference.len();
    let mut probes = Vec::with_capacity(n * spec.eps_schedule.len());
    for &e in &spec.eps_schedule {
        probes.extend(probes_for(reference, spec.regime, e).probes);
    }
    let (cov, means) = probe_moments(model, &ProbeSet::new(probes))?;
    let sampler = GaussianSampler::new(&cov, means)?;
    Ok(seeds.par_iter().map(|&seed| diagnose(reference, spec, &sampler.sample(seed).values)).collect())
}

fn diagnose(reference: &AtomicMeasure, spec: &GmcSpec, values: &[f64]) -> ConvergenceReport {
    let n = reference.len();
    let masses: Vec<Vec<f64>> = spec
        .eps_schedule
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            reference
                .atoms
                .iter()
                .zip(&values[k * n..(k + 1) * n])
                .map(|(a, p)| a.weight * spec.factor(*p, e))
                .collect()
        })
        .collect();
    let total_mass = masses.iter().map(|m| m.iter().sum()).collect();
    let k = masses.len();
    let total: f64 = masses[k - 2].iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let (mut ca, mut cb) = (0.0, 0.0);
    let cumulative_change: Vec<f64> = masses[k - 2]
        .iter()
        .zip(&masses[k - 1])
        .map(|(a, b)| {
            ca += a;
            cb += b;
            (cb - ca).abs() / total
        })
        .collect();
    let median_change = if n == 0 { 0.0 } else { stats::median(&cumulative_change) };
    ConvergenceReport { total_mass, cumulative_change, median_change, converged: median_change < GMC_CONVERGENCE_TOL }
}
