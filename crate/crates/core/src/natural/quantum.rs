use std::sync::Arc;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::minkowski::segment_of;
use crate::chaos::{Atom, AtomicMeasure, Support};
use crate::error::{Error, Result};
use crate::field::{
    khat, probe_admissible, probe_moments, q_of, CovarianceModel, FieldLaw, GaussianSampler, Probe, ProbeSet, Regime,
};
use crate::loewner::{MapChain, PlaneMap, Zip};
use crate::seed::{self, seed_for};

/// Replicates per deterministic accumulation block.
const BLOCK: usize = 256;

/// Placement of boundary atoms on `[0, φ_0^t(0+)]`. Each atom sits at the
/// middle of its cell and is probed by a semicircle of radius at most half
/// the cell width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// Cells of width `spacing` (at least `2 eps`), probes of radius `eps`.
    Uniform { eps: f64, spacing: f64 },
    /// Cells bisected until the landing points of neighbouring cell edges
    /// are within `curve_gap` of each other, probe radius half the cell
    /// width. Resolves parts of the curve with little harmonic measure.
    Adaptive { curve_gap: f64 },
}

impl Layout {
    pub fn uniform(eps: f64) -> Self {
        Layout::Uniform { eps, spacing: 2.0 * eps }
    }
}

/// Settings of the boundary chaos used for quantum time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTimeConfig {
    pub layout: Layout,
    pub replicates: usize,
    pub seed: u64,
    /// Atoms whose curve point lies within this distance of the root are
    /// dropped.
    pub exclusion: f64,
    /// Capacity-time segments for which masses and errors are reported.
    pub segments: Vec<(f64, f64)>,
}

impl QuantumTimeConfig {
    pub fn new(layout: Layout, replicates: usize, seed: u64) -> Self {
        Self { layout, replicates, seed, exclusion: 0.0, segments: Vec::new() }
    }

    pub fn with_segments(mut self, segments: Vec<(f64, f64)>) -> Self {
        self.segments = segments;
        self
    }

    pub fn with_exclusion(mut self, r: f64) -> Self {
        self.exclusion = r;
        self
    }
}

/// `K̂` at a bulk point, in closed form for the Dirichlet field.
pub fn bulk_khat(model: &CovarianceModel, z: C) -> Result<f64> {
    match model.law {
        FieldLaw::Dirichlet => Ok((2.0 * z.im).ln()),
        _ => {
            let s = (0.5 * z.im).min(1e-2);
            Ok(khat(model, z, Regime::Bulk, &[s, s / 2.0, s / 4.0])?.value)
        }
    }
}

/// Boundary atoms of the unzipped picture at time `t`, pulled back to the
/// curve, with the jointly Gaussian law of their pairings.
#[derive(Clone, Debug)]
pub struct BoundaryPullback {
    pub gamma: f64,
    pub t: f64,
    /// Probe radius and cell width of each atom.
    pub eps: Vec<f64>,
    pub dx: Vec<f64>,
    pub x: Vec<f64>,
    /// Landing point on the curve and its capacity time.
    pub z0: Vec<C>,
    pub tau: Vec<f64>,
    pub khat: Vec<f64>,
    /// `dx · ε^{γ²/4} · F(z₀)`.
    pub base: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub excluded_hull: usize,
    pub excluded_window: usize,
    /// Capacity-time stretches of the curve whose adaptive cells reached the
    /// narrowest width unresolved, and the curve length they skip.
    pub unresolved: Vec<(f64, f64)>,
    pub unresolved_span: f64,
    sampler: Option<GaussianSampler>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub replicates: usize,
    pub atom_mean: Vec<f64>,
    pub atom_se: Vec<f64>,
    pub segment_mean: Vec<f64>,
    pub segment_se: Vec<f64>,
    pub total_mean: f64,
    pub total_se: f64,
}

#[derive(Clone)]
struct Sums {
    atom: Vec<f64>,
    atom2: Vec<f64>,
    seg: Vec<f64>,
    seg2: Vec<f64>,
    tot: f64,
    tot2: f64,
}

impl Sums {
    fn new(n: usize, m: usize) -> Self {
        Self { atom: vec![0.0; n], atom2: vec![0.0; n], seg: vec![0.0; m], seg2: vec![0.0; m], tot: 0.0, tot2: 0.0 }
    }

    fn merge(mut self, o: &Sums) -> Self {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.atom, &o.atom);
        add(&mut self.atom2, &o.atom2);
        add(&mut self.seg, &o.seg);
        add(&mut self.seg2, &o.seg2);
        self.tot += o.tot;
        self.tot2 += o.tot2;
        self
    }
}

fn moments(sum: f64, sum2: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let m = sum / nf;
    if n < 2 {
        return (m, f64::NAN);
    }
    let var = ((sum2 - nf * m * m) / (nf - 1.0)).max(0.0);
    (m, (var / nf).sqrt())
}

impl BoundaryPullback {
    /// Atoms on `[0, φ_0^t(0+)]` placed by `layout`, each paired with a
    /// semicircle pulled back by `φ_t^0`, including the coordinate change
    /// `Q log|(φ_t^0)'|`.
    pub fn build(
        model: &CovarianceModel,
        chain: Arc<MapChain>,
        t: f64,
        gamma: f64,
        layout: Layout,
        exclusion: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::UnsupportedParameter(format!("gamma = {gamma} outside (0, 2)")));
        }
        match layout {
            Layout::Uniform { eps, spacing } if !(eps > 0.0) || spacing < 2.0 * eps * (1.0 - 1e-12) => {
                return Err(Error::Precondition(format!("spacing {spacing} must be at least 2 eps = {}", 2.0 * eps)));
            }
            Layout::Adaptive { curve_gap } if !(curve_gap > 0.0) => {
                return Err(Error::Precondition(format!("curve gap {curve_gap} must be positive")));
            }
            _ => {}
        }
        if !(0.0..=chain.horizon() * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let mut out = Self::empty(gamma, t);
        let right = chain.right_end(0.0, t)?;
        if t == 0.0 || right <= 0.0 {
            return Ok(out);
        }
        let zip: Arc<dyn PlaneMap> = Arc::new(Zip { chain, t, s: 0.0 });
        let cells = match layout {
            Layout::Uniform { eps, spacing } => {
                let n = ((right / spacing).floor() as usize).max(1);
                let dx = right / n as f64;
                (0..n).map(|k| ((k as f64 + 0.5) * dx, dx, eps)).collect()
            }
            Layout::Adaptive { curve_gap } => {
                let (cells, skipped, span) = adaptive_cells(zip.as_ref(), right, curve_gap);
                out.unresolved = skipped;
                out.unresolved_span = span;
                cells
            }
        };
        out.assemble(model, zip, cells, exclusion)?;
        Ok(out)
    }

    /// Pullback on explicit cells `(centre, width, eps)` of
    /// `[0, φ_0^t(0+)]`, for comparing two constructions atom by atom.
    pub fn build_on_cells(
        model: &CovarianceModel,
        chain: Arc<MapChain>,
        t: f64,
        gamma: f64,
        cells: &[(f64, f64, f64)],
        exclusion: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::UnsupportedParameter(format!("gamma = {gamma} outside (0, 2)")));
        }
        if !(0.0..=chain.horizon() * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let mut out = Self::empty(gamma, t);
        if cells.iter().any(|c| !(c.1 > 0.0 && c.2 > 0.0 && c.2 <= 0.5 * c.1 * (1.0 + 1e-12))) {
            return Err(Error::Precondition("cells need positive width and eps at most half of it".into()));
        }
        let zip: Arc<dyn PlaneMap> = Arc::new(Zip { chain, t, s: 0.0 });
        out.assemble(model, zip, cells.to_vec(), exclusion)?;
        Ok(out)
    }

    fn empty(gamma: f64, t: f64) -> Self {
        Self {
            gamma,
            t,
            eps: Vec::new(),
            dx: Vec::new(),
            x: Vec::new(),
            z0: Vec::new(),
            tau: Vec::new(),
            khat: Vec::new(),
            base: Vec::new(),
            mean: Vec::new(),
            var: Vec::new(),
            excluded_hull: 0,
            excluded_window: 0,
            unresolved: Vec::new(),
            unresolved_span: 0.0,
            sampler: None,
        }
    }

    fn assemble(&mut self, model: &CovarianceModel, zip: Arc<dyn PlaneMap>, cells: Vec<(f64, f64, f64)>, exclusion: f64) -> Result<()> {
        let gamma = self.gamma;
        type Candidate = Option<(f64, f64, f64, C, f64, f64, Probe)>;
        let candidates: Vec<Result<Candidate>> = cells
            .into_par_iter()
            .map(|(x, dx, eps)| {
                let e = match zip.eval(C::new(x, 0.0)) {
                    Ok(e) => e,
                    Err(_) => return Ok(None),
                };
                let Some(tau) = e.landed else { return Ok(None) };
                if e.value.norm() < exclusion {
                    return Ok(Some((x, dx, eps, e.value, tau, f64::NAN, Probe::boundary(x, eps))));
                }
                let probe = Probe::boundary(x, eps).pulled_back(zip.clone());
                if probe_admissible(model, &probe).is_err() || e.value.im <= 0.0 {
                    return Ok(None);
                }
                let k = bulk_khat(model, e.value)?;
                Ok(Some((x, dx, eps, e.value, tau, k, probe)))
            })
            .collect();
        let mut kept = Vec::new();
        for c in candidates {
            match c? {
                None => self.excluded_hull += 1,
                Some(a) if a.5.is_nan() => self.excluded_window += 1,
                Some(a) => kept.push(a),
            }
        }
        // Order along the curve, matching the order of curve measures.
        kept.sort_by(|a, b| a.4.total_cmp(&b.4));
        let mut probes = Vec::with_capacity(kept.len());
        for (x, dx, eps, z, tau, k, probe) in kept {
            self.x.push(x);
            self.dx.push(dx);
            self.eps.push(eps);
            self.z0.push(z);
            self.tau.push(tau);
            self.khat.push(k);
            self.base.push(dx * eps.powf(gamma * gamma / 4.0) * (-gamma * gamma / 8.0 * k).exp());
            probes.push(probe);
        }
        if probes.is_empty() {
            return Ok(());
        }
        let (cov, mean) = probe_moments(model, &ProbeSet::new(probes).with_offset(q_of(gamma)))?;
        self.var = cov.diagonal().iter().copied().collect();
        self.mean = mean.clone();
        self.sampler = Some(GaussianSampler::new(&cov, mean)?);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Exact expected weights `base · e^{(γ/2) m + (γ²/8) v}`.
    pub fn exact_weights(&self) -> Vec<f64> {
        let g = self.gamma;
        self.base
            .iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((b, m), v)| b * (0.5 * g * m + g * g / 8.0 * v).exp())
            .collect()
    }

    /// Monte Carlo over field replicates. `multiplier` scales each atom's
    /// weight (for pushforwards); `segments` partitions by `tau`.
    pub fn simulate(&self, multiplier: Option<&[f64]>, segments: &[(f64, f64)], replicates: usize, seed: u64) -> ReplicateStats {
        let n = self.len();
        let m = segments.len();
        let Some(sampler) = &self.sampler else {
            return ReplicateStats {
                replicates,
                segment_mean: vec![0.0; m],
                segment_se: vec![0.0; m],
                ..Default::default()
            };
        };
        let seg_of: Vec<Option<usize>> = self.tau.iter().map(|&t| segment_of(segments, t)).collect();
        let scale: Vec<f64> = match multiplier {
            Some(mult) => self.base.iter().zip(mult).map(|(b, k)| b * k).collect(),
            None => self.base.clone(),
        };
        let half = 0.5 * self.gamma;
        let blocks = replicates.div_ceil(BLOCK);
        let partial: Vec<Sums> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut s = Sums::new(n, m);
                let (mut out, mut z) = (vec![0.0; n], vec![0.0; n]);
                let mut seg = vec![0.0; m];
                for r in b * BLOCK..((b + 1) * BLOCK).min(replicates) {
                    let mut rng = seed::rng(seed_for(seed, r as u64));
                    sampler.sample_into(&mut rng, &mut out, &mut z);
                    seg.iter_mut().for_each(|v| *v = 0.0);
                    let mut tot = 0.0;
                    for i in 0..n {
                        let w = scale[i] * (half * out[i]).exp();
                        s.atom[i] += w;
                        s.atom2[i] += w * w;
                        tot += w;
                        if let Some(j) = seg_of[i] {
                            seg[j] += w;
                        }
                    }
                    for j in 0..m {
                        s.seg[j] += seg[j];
                        s.seg2[j] += seg[j] * seg[j];
                    }
                    s.tot += tot;
                    s.tot2 += tot * tot;
                }
                s
            })
            .collect();
        let sums = partial.iter().fold(Sums::new(n, m), |a, b| a.merge(b));
        let (atom_mean, atom_se) = (0..n).map(|i| moments(sums.atom[i], sums.atom2[i], replicates)).unzip();
        let (segment_mean, segment_se) = (0..m).map(|j| moments(sums.seg[j], sums.seg2[j], replicates)).unzip();
        let (total_mean, total_se) = moments(sums.tot, sums.tot2, replicates);
        ReplicateStats { replicates, atom_mean, atom_se, segment_mean, segment_se, total_mean, total_se }
    }

    /// Curve measure with the given per-atom weights, timed by landing.
    pub fn measure(&self, weights: &[f64], d: f64) -> Result<AtomicMeasure> {
        let atoms = self.z0.iter().zip(&self.tau).zip(weights).map(|((z, t), w)| Atom::timed(*z, *w, *t)).collect();
        AtomicMeasure::new(atoms, d, Support::Curve)
    }
}

/// Monte Carlo estimate of `μ⁰` on `η[0, t]`, together with its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTimeMeasure {
    pub measure: AtomicMeasure,
    pub replicates: usize,
    pub atom_se: Vec<f64>,
    /// `K̂` at each atom, entering `F = e^{-(γ²/8) K̂}`.
    pub khat: Vec<f64>,
    /// Analytic expectation of each atom's weight.
    pub exact: Vec<f64>,
    pub segments: Vec<(f64, f64)>,
    pub segment_mean: Vec<f64>,
    pub segment_se: Vec<f64>,
    pub total_se: f64,
    pub excluded_hull: usize,
    pub excluded_window: usize,
    pub unresolved: Vec<(f64, f64)>,
    pub unresolved_span: f64,
    pub config: QuantumTimeConfig,
    pub gamma: f64,
    pub t: f64,
}

impl QuantumTimeMeasure {
    /// Atoms as CSV under a JSON header with the settings and segment
    /// masses; the fields of `extra` (κ, trace seed) are merged into it.
    pub fn write_csv<W: std::io::Write>(&self, w: W, extra: &serde_json::Value) -> Result<()> {
        let mut head = serde_json::json!({
            "gamma": self.gamma,
            "t": self.t,
            "replicates": self.replicates,
            "seed": self.config.seed,
            "layout": self.config.layout,
            "exclusion": self.config.exclusion,
            "segments": self.segments,
            "segment_mean": self.segment_mean,
            "segment_se": self.segment_se,
            "excluded_hull": self.excluded_hull,
            "excluded_window": self.excluded_window,
            "unresolved": self.unresolved,
        });
        super::minkowski::merge(&mut head, extra);
        self.measure.write_csv(w, Some(&head))
    }
}

/// `μ⁰` restricted to `η[0, t]`: the expected boundary chaos `:e^{(γ/2)h^t} dx:`
/// on `[0, φ_0^t(0+)]`, with `h^t` the Dirichlet field pulled back to the
/// unzipped picture, weighted by `F` at the landing point and carried back
/// to the curve.
pub fn expected_quantum_time(chain: Arc<MapChain>, t: f64, gamma: f64, config: &QuantumTimeConfig) -> Result<QuantumTimeMeasure> {
    expected_quantum_time_with(&CovarianceModel::dirichlet(), chain, t, gamma, config)
}

/// [`expected_quantum_time`] for an arbitrary field model.
pub fn expected_quantum_time_with(
    model: &CovarianceModel,
    chain: Arc<MapChain>,
    t: f64,
    gamma: f64,
    config: &QuantumTimeConfig,
) -> Result<QuantumTimeMeasure> {
    let pb = BoundaryPullback::build(model, chain, t, gamma, config.layout, config.exclusion)?;
    let stats = pb.simulate(None, &config.segments, config.replicates, config.seed);
    let d = 1.0 + gamma * gamma / 8.0;
    Ok(QuantumTimeMeasure {
        measure: pb.measure(&stats.atom_mean, d)?,
        replicates: config.replicates,
        atom_se: stats.atom_se,
        khat: pb.khat.clone(),
        exact: pb.exact_weights(),
        segments: config.segments.clone(),
        segment_mean: stats.segment_mean,
        segment_se: stats.segment_se,
        total_se: stats.total_se,
        excluded_hull: pb.excluded_hull,
        excluded_window: pb.excluded_window,
        unresolved: pb.unresolved.clone(),
        unresolved_span: pb.unresolved_span,
        config: config.clone(),
        gamma,
        t,
    })
}

/// Narrowest cell of an adaptive layout relative to `[0, φ_0^t(0+)]`.
/// Below this the landing points of neighbouring pre-images are no longer
/// separated in double precision; such stretches sit in deep fjords of the
/// curve.
pub const MIN_CELL: f64 = 1e-9;

/// Adaptive cells `(centre, width, eps)` covering `[0, right]`, bisected
/// until the landing points of each cell's edges are within `gap`. Cells
/// that reach [`MIN_CELL`] without meeting the gap are returned separately
/// as the capacity-time intervals between their edge landings, together
/// with the curve length they skip.
pub(crate) fn adaptive_cells(zip: &dyn PlaneMap, right: f64, gap: f64) -> (Vec<(f64, f64, f64)>, Vec<(f64, f64)>, f64) {
    let nan = (C::new(f64::NAN, f64::NAN), f64::NAN);
    let land = |x: f64| -> (C, f64) {
        zip.eval(C::new(x, 0.0)).map(|e| (e.value, e.landed.unwrap_or(f64::NAN))).unwrap_or(nan)
    };
    let min = MIN_CELL * right;
    let mut out = Vec::new();
    let mut skipped: Vec<(f64, f64)> = Vec::new();
    let mut span = 0.0;
    // Coarse uniform start so that no stretch is skipped.
    let n0 = 64;
    let edges: Vec<f64> = (0..=n0).map(|k| right * k as f64 / n0 as f64).collect();
    let z: Vec<_> = edges.iter().map(|&x| land(x)).collect();
    let mut stack: Vec<_> = (0..n0).rev().map(|k| (edges[k], edges[k + 1], z[k], z[k + 1])).collect();
    while let Some((a, b, za, zb)) = stack.pop() {
        let d = (zb.0 - za.0).norm();
        if d <= gap {
            out.push((0.5 * (a + b), b - a, 0.5 * (b - a)));
        } else if b - a < 2.0 * min {
            if d.is_finite() {
                span += d;
            }
            let (lo, hi) = (za.1.min(zb.1), za.1.max(zb.1));
            // Neighbouring skipped cells share an edge; merge them.
            match skipped.last_mut() {
                Some(last) if last.0 <= hi && lo <= last.1 => *last = (last.0.min(lo), last.1.max(hi)),
                _ => skipped.push((lo, hi)),
            }
        } else {
            let m = 0.5 * (a + b);
            let zm = land(m);
            stack.push((m, b, zm, zb));
            stack.push((a, m, za, zm));
        }
    }
    (out, skipped, span)
}
