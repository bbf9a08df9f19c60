use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CovarianceModel;
use crate::loewner::{sample_sle_driving, MapChain, PlaneMap, Unzip};
use crate::natural::{equal_segments, segment_of, BoundaryPullback, Layout};
use crate::seed::seed_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovConfig {
    pub dt: f64,
    pub trace_seed: u64,
    pub segments: usize,
    pub curve_gap: f64,
    /// Ball about the root of the unzipped curve left out of both sides.
    pub exclusion: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl MarkovConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self { dt: 1e-4, trace_seed: seed, segments: 4, curve_gap: 0.01, exclusion: 0.05, replicates, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub kappa: f64,
    pub s: f64,
    pub t: f64,
    /// Partition of `[0, t - s]` in the capacity time of the unzipped curve.
    pub segments: Vec<(f64, f64)>,
    /// `μ⁰` on `η⁰[s, t]` carried to the unzipped curve with `|φ'|^d`.
    pub lhs: Vec<f64>,
    pub lhs_se: Vec<f64>,
    /// Quantum time of the unzipped curve under a fresh field.
    pub rhs: Vec<f64>,
    pub rhs_se: Vec<f64>,
    /// Exact expectations of both sides for the same atoms.
    pub lhs_exact: Vec<f64>,
    pub rhs_exact: Vec<f64>,
    pub z: Vec<f64>,
    /// Atoms shared by both sides.
    pub atoms: usize,
    /// Cells of the right side the left side could not use.
    pub dropped: usize,
    /// Capacity stretches of the unzipped curve left unresolved.
    pub unresolved: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Both sides of `μ⁰|η⁰[s,t] ∘ φ_s^0 = |(φ_s^0)'|^d μ^s` on a fresh SLE_κ.
pub fn markov_covariance_check(kappa: f64, s: f64, t: f64, config: &MarkovConfig) -> Result<MarkovReport> {
    let path = sample_sle_driving(kappa, config.dt, t, config.trace_seed)?;
    let chain = Arc::new(MapChain::from_driving(&path)?);
    markov_covariance_check_on(chain, kappa, s, t, config)
}

/// [`markov_covariance_check`] on a given chain.
pub fn markov_covariance_check_on(chain: Arc<MapChain>, kappa: f64, s: f64, t: f64, config: &MarkovConfig) -> Result<MarkovReport> {
    if !(kappa > 0.0 && kappa < 4.0) {
        return Err(Error::UnsupportedParameter(format!("kappa = {kappa} outside (0, 4)")));
    }
    if !(0.0 < s && s <= t && t <= chain.horizon() * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("need 0 < s <= t <= {}, got s = {s}, t = {t}", chain.horizon())));
    }
    let gamma = kappa.sqrt();
    let d = 1.0 + kappa / 8.0;
    let model = CovarianceModel::dirichlet();
    let layout = Layout::Adaptive { curve_gap: config.curve_gap };
    let segments = equal_segments(0.0, t - s, config.segments);
    let shifted: Vec<(f64, f64)> = segments.iter().map(|&(a, b)| (a + s, b + s)).collect();
    if s == t {
        let zero = vec![0.0; config.segments];
        return Ok(MarkovReport {
            kappa,
            s,
            t,
            segments,
            lhs: zero.clone(),
            lhs_se: zero.clone(),
            rhs: zero.clone(),
            rhs_se: zero.clone(),
            lhs_exact: zero.clone(),
            rhs_exact: zero.clone(),
            z: zero,
            atoms: 0,
            dropped: 0,
            unresolved: Vec::new(),
            pass: true,
        });
    }

    // The right side fixes the cells. Past time s both sides live on the
    // same unzipped real line, so the left side is built on the same cells
    // and the two measures can be compared atom by atom.
    let tail = Arc::new(chain.tail_from(s)?);
    let unzipped = BoundaryPullback::build(&model, tail, t - s, gamma, layout, config.exclusion)?;
    let cells: Vec<(f64, f64, f64)> = (0..unzipped.len()).map(|k| (unzipped.x[k], unzipped.dx[k], unzipped.eps[k])).collect();
    let full = BoundaryPullback::build_on_cells(&model, chain.clone(), t, gamma, &cells, 0.0)?;

    let unzip = Unzip { chain: chain.clone(), s: 0.0, t: s };
    let mut lhs_mult = vec![0.0; full.len()];
    let mut shared = Vec::with_capacity(full.len());
    for k in 0..full.len() {
        if full.tau[k] <= s {
            continue;
        }
        lhs_mult[k] = unzip.eval(full.z0[k])?.deriv.norm().powf(d);
        shared.push(full.x[k].to_bits());
    }
    shared.sort_unstable();
    let rhs_mult: Vec<f64> =
        unzipped.x.iter().map(|x| if shared.binary_search(&x.to_bits()).is_ok() { 1.0 } else { 0.0 }).collect();
    let dropped = unzipped.len() - shared.len();

    let lhs_stats = full.simulate(Some(&lhs_mult), &shifted, config.replicates, seed_for(config.seed, 0));
    let rhs_stats = unzipped.simulate(Some(&rhs_mult), &segments, config.replicates, seed_for(config.seed, 1));

    let exact_by = |pb: &BoundaryPullback, mult: &[f64], segs: &[(f64, f64)]| {
        let mut out = vec![0.0; segs.len()];
        for ((w, m), tau) in pb.exact_weights().iter().zip(mult).zip(&pb.tau) {
            if let Some(j) = segment_of(segs, *tau) {
                out[j] += w * m;
            }
        }
        out
    };
    let lhs_exact = exact_by(&full, &lhs_mult, &shifted);
    let rhs_exact = exact_by(&unzipped, &rhs_mult, &segments);
    let z: Vec<f64> = (0..segments.len())
        .map(|j| {
            let se = lhs_stats.segment_se[j].hypot(rhs_stats.segment_se[j]);
            let diff = lhs_stats.segment_mean[j] - rhs_stats.segment_mean[j];
            if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(MarkovReport {
        kappa,
        s,
        t,
        pass: z.iter().all(|v| v.abs() < 3.0),
        segments,
        lhs: lhs_stats.segment_mean,
        lhs_se: lhs_stats.segment_se,
        rhs: rhs_stats.segment_mean,
        rhs_se: rhs_stats.segment_se,
        lhs_exact,
        rhs_exact,
        z,
        atoms: shared.len(),
        dropped,
        unresolved: unzipped.unresolved.clone(),
    })
}
