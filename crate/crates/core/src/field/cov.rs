//! Covariance matrices of probe pairings.
//!
//! Unmapped probes use exact circle-average identities. Mapped probes are
//! discretised by nodes on the pre-image circle or semicircle; the
//! logarithmic singularity of a probe against itself is integrated exactly
//! on the pre-image and only the smooth remainder
//! `-log|(φ(w) - φ(y)) / (w - y)| + S(φ(w), φ(y))` is summed.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rayon::prelude::*;

use super::model::{CovarianceModel, FieldLaw, Mollifier, Regime, SEMICIRCLE_ENERGY};
use super::probe::{Probe, ProbeSet};
use crate::error::{Error, Result};
use crate::quad;

/// A probe reduced to something the kernel can be summed against.
#[derive(Clone, Debug)]
pub(crate) enum Prepared {
    /// Unmapped probe written as a mixture of circle/semicircle averages.
    Closed { regime: Regime, centre: C, mix: Vec<(f64, f64)>, mean_shift: f64 },
    /// Mapped probe discretised on nodes.
    Nodes(NodeSet),
}

#[derive(Clone, Debug)]
pub(crate) struct NodeSet {
    pub eps: f64,
    /// Full mapped circle standing in for the even extension of a boundary
    /// probe whose map keeps the real line real.
    pub reflect: bool,
    pub semicircle: bool,
    pub pre: Vec<C>,
    pub img: Vec<C>,
    pub logd: Vec<f64>,
    pub w: Vec<f64>,
}

fn bump_mixture(n: usize) -> Vec<(f64, f64)> {
    // density ∝ (1 - s²)² on the unit disk; radial weight ∝ s (1 - s²)².
    let nodes: Vec<(f64, f64)> = quad::gauss_on(n, 0.0, 1.0).map(|(s, w)| (s, w * s * (1.0 - s * s).powi(2))).collect();
    let total: f64 = nodes.iter().map(|p| p.1).sum();
    nodes.into_iter().map(|(s, w)| (s, w / total)).collect()
}

/// Rejects node images that jump, which happens when the pre-image curve
/// crosses the hull of the map.
pub(crate) fn check_continuity(pre: &[C], img: &[C], logd: &[f64], closed: bool) -> Result<()> {
    let n = pre.len();
    let pairs = if closed { n } else { n.saturating_sub(1) };
    for a in 0..pairs {
        let b = (a + 1) % n;
        let expect = (pre[b] - pre[a]).norm() * 0.5 * (logd[a].exp() + logd[b].exp());
        if (img[b] - img[a]).norm() > 4.0 * expect + 1e-300 {
            return Err(Error::Domain(format!("probe through {} crosses the hull", pre[a])));
        }
    }
    Ok(())
}

impl NodeSet {
    fn build(model: &CovarianceModel, p: &Probe) -> Result<NodeSet> {
        let map = p.map.as_ref().expect("mapped probe");
        let eps = p.scale;
        let q = model.quadrature;
        let mut reflect = false;
        if p.regime == Regime::Boundary && model.reflection_symmetric() {
            // Real-preserving near the probe: the endpoints and centre stay real.
            let ends = [p.centre - eps, p.centre, p.centre + eps];
            reflect = ends.iter().all(|&x| {
                map.eval(x).map(|e| e.value.im == 0.0 && e.landed.is_none()).unwrap_or(false)
            });
        }
        let (pre, w): (Vec<C>, Vec<f64>) = match (p.regime, reflect) {
            (Regime::Bulk, _) | (Regime::Boundary, true) => {
                let m = q.circle_nodes;
                (0..m)
                    .map(|a| (p.centre + C::from_polar(eps, TAU * (a as f64 + 0.5) / m as f64), 1.0 / m as f64))
                    .unzip()
            }
            (Regime::Boundary, false) => quad::gauss_on(q.semicircle_nodes, 0.0, PI)
                .map(|(th, w)| (p.centre + C::from_polar(eps, th), w / PI))
                .unzip(),
        };
        let mut img = Vec::with_capacity(pre.len());
        let mut logd = Vec::with_capacity(pre.len());
        for &z in &pre {
            let (zz, flip) = if z.im < 0.0 { (z.conj(), true) } else { (z, false) };
            let e = map.eval(zz)?;
            if !reflect && e.value.im <= 0.0 {
                return Err(Error::Domain(format!("probe node {z} maps to {} on or below the real line", e.value)));
            }
            model.check_point(e.value)?;
            img.push(if flip { e.value.conj() } else { e.value });
            logd.push(e.deriv.norm().ln());
        }
        check_continuity(&pre, &img, &logd, !(p.regime == Regime::Boundary && !reflect))?;
        Ok(NodeSet { eps, reflect, semicircle: p.regime == Regime::Boundary && !reflect, pre, img, logd, w })
    }

    /// Smooth part `-log|Δφ / Δw|`, with `-log|φ'|` on the diagonal.
    #[inline]
    fn distortion(&self, a: usize, b: usize) -> f64 {
        if a == b {
            -self.logd[a]
        } else {
            -((self.img[a] - self.img[b]) / (self.pre[a] - self.pre[b])).norm().ln()
        }
    }

    fn self_cov(&self, model: &CovarianceModel) -> f64 {
        let n = self.pre.len();
        let mut dist = 0.0;
        for a in 0..n {
            for b in 0..n {
                dist += self.w[a] * self.w[b] * self.distortion(a, b);
            }
        }
        if self.reflect {
            let g = 2.0 * (-self.eps.ln() + dist);
            match model.law {
                FieldLaw::Neumann(rho) => {
                    let m: f64 = self.img.iter().zip(&self.w).map(|(u, w)| w * rho.phi(*u)).sum();
                    g - 2.0 * m + rho.energy()
                }
                _ => g,
            }
        } else {
            let mut smooth = 0.0;
            for a in 0..n {
                for b in 0..n {
                    smooth += self.w[a] * self.w[b] * model.smooth(self.img[a], self.img[b]);
                }
            }
            let shape = if self.semicircle { SEMICIRCLE_ENERGY } else { 0.0 };
            -self.eps.ln() + shape + dist + smooth
        }
    }

    fn mean(&self, model: &CovarianceModel, q: f64) -> f64 {
        self.img
            .iter()
            .zip(&self.logd)
            .zip(&self.w)
            .map(|((u, ld), w)| w * (model.mean_at(*u) + q * ld))
            .sum()
    }
}

impl Prepared {
    pub(crate) fn build(model: &CovarianceModel, p: &Probe) -> Result<Prepared> {
        if !(p.scale > 0.0) {
            return Err(Error::Precondition(format!("probe scale {} must be positive", p.scale)));
        }
        let (centre, eps, shift, mapped) = match &p.map {
            None => (p.centre, p.scale, 0.0, false),
            Some(m) => match m.similarity() {
                Some((l, b)) => (l * p.centre + b, l * p.scale, l.ln(), false),
                None => (p.centre, p.scale, 0.0, true),
            },
        };
        if mapped {
            if model.mollifier != Mollifier::Circle {
                return Err(Error::Precondition("mapped probes support the circle mollifier only".into()));
            }
            return Ok(Prepared::Nodes(NodeSet::build(model, p)?));
        }
        match p.regime {
            Regime::Bulk if eps > centre.im * (1.0 + 1e-12) => {
                return Err(Error::Domain(format!("circle of radius {eps} about {centre} leaves the half-plane")))
            }
            Regime::Boundary if centre.im != 0.0 => {
                return Err(Error::Domain(format!("boundary probe centre {centre} is off the real line")))
            }
            _ => {}
        }
        if let FieldLaw::Wedge { .. } = model.law {
            if centre.norm() + eps > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("probe at {centre} of radius {eps} leaves the unit half-disk")));
            }
        }
        let mix = match model.mollifier {
            Mollifier::Circle => vec![(eps, 1.0)],
            Mollifier::Bump => bump_mixture(12).into_iter().map(|(s, w)| (s * eps, w)).collect(),
        };
        Ok(Prepared::Closed { regime: p.regime, centre, mix, mean_shift: shift })
    }

    pub(crate) fn mean(&self, model: &CovarianceModel, q: f64) -> f64 {
        match self {
            Prepared::Closed { centre, mix, mean_shift, .. } => {
                mix.iter().map(|(r, w)| w * model.probe_mean(*centre, *r)).sum::<f64>() + q * mean_shift
            }
            Prepared::Nodes(ns) => ns.mean(model, q),
        }
    }

    /// Average of `K(·, v)` against this probe.
    fn avg_against(&self, model: &CovarianceModel, v: C) -> f64 {
        match self {
            Prepared::Closed { regime, centre, mix, .. } => {
                mix.iter().map(|(r, w)| w * model.probe_avg(*regime, *centre, *r, v)).sum()
            }
            Prepared::Nodes(ns) => ns.img.iter().zip(&ns.w).map(|(u, w)| w * model.kernel_raw(*u, v)).sum(),
        }
    }
}

pub(crate) fn pair(model: &CovarianceModel, a: &Prepared, b: &Prepared, same: bool) -> f64 {
    match (a, b) {
        (Prepared::Closed { regime: ra, centre: ca, mix: ma, .. }, Prepared::Closed { regime: rb, centre: cb, mix: mb, .. }) => {
            let mut s = 0.0;
            for (r1, w1) in ma {
                for (r2, w2) in mb {
                    s += w1 * w2 * model.pair_closed((*ra, *ca, *r1), (*rb, *cb, *r2));
                }
            }
            s
        }
        (Prepared::Nodes(na), _) if same => na.self_cov(model),
        (closed @ Prepared::Closed { .. }, Prepared::Nodes(nb)) => {
            nb.img.iter().zip(&nb.w).map(|(v, w)| w * closed.avg_against(model, *v)).sum()
        }
        (Prepared::Nodes(_), Prepared::Closed { .. }) => pair(model, b, a, false),
        (Prepared::Nodes(na), Prepared::Nodes(nb)) => {
            let mut s = 0.0;
            for (u, wu) in na.img.iter().zip(&na.w) {
                for (v, wv) in nb.img.iter().zip(&nb.w) {
                    s += wu * wv * model.kernel_raw(*u, *v);
                }
            }
            s
        }
    }
}

pub(crate) fn prepare_all(model: &CovarianceModel, set: &ProbeSet) -> Result<Vec<Prepared>> {
    set.probes.par_iter().map(|p| Prepared::build(model, p)).collect()
}

pub(crate) fn matrix_of(model: &CovarianceModel, prep: &[Prepared]) -> DMatrix<f64> {
    let n = prep.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| pair(model, &prep[i], &prep[j], i == j)).collect())
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Fails when the probe cannot be paired, for instance when its mapped
/// image crosses the hull or leaves the domain.
pub fn probe_admissible(model: &CovarianceModel, probe: &Probe) -> Result<()> {
    Prepared::build(model, probe).map(|_| ())
}

/// Covariance matrix of the pairings `(θ_i, h)`.
pub fn probe_covariance(model: &CovarianceModel, probes: &ProbeSet) -> Result<DMatrix<f64>> {
    let prep = prepare_all(model, probes)?;
    Ok(matrix_of(model, &prep))
}

/// Means of the pairings, including the coordinate-change term for mapped
/// probes.
pub fn probe_means(model: &CovarianceModel, probes: &ProbeSet) -> Result<Vec<f64>> {
    let prep = prepare_all(model, probes)?;
    Ok(prep.iter().map(|p| p.mean(model, probes.log_derivative_offset)).collect())
}

/// Covariance and means computed from one preparation pass.
pub fn probe_moments(model: &CovarianceModel, probes: &ProbeSet) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let prep = prepare_all(model, probes)?;
    let means = prep.iter().map(|p| p.mean(model, probes.log_derivative_offset)).collect();
    Ok((matrix_of(model, &prep), means))
}
