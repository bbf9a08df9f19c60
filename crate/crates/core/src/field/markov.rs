use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

use super::cov::check_continuity;
use super::model::{CovarianceModel, Regime};
use super::probe::ProbeSet;
use crate::error::{Error, Result};
use crate::loewner::MapChain;
use crate::quad;

struct Nodes {
    pre: Vec<C>,
    img: Vec<C>,
    logd: Vec<f64>,
    w: Vec<f64>,
}

/// Covariance of the harmonic part in the Markov decomposition
/// `h = h∘φ_0^s + harmonic` of a Dirichlet-type field:
/// `M(probes) - M(probes pulled back by φ_0^s)`.
///
/// The difference kernel `log|Δφ/Δw| + S(u, v) - S(φu, φv)` is smooth, so
/// the nodal sums converge spectrally and the result is a Gram matrix.
pub fn markov_split_covariance(model: &CovarianceModel, chain: &MapChain, s: f64, probes: &ProbeSet) -> Result<DMatrix<f64>> {
    let q = model.quadrature;
    let sets = probes
        .probes
        .iter()
        .map(|p| {
            if p.map.is_some() {
                return Err(Error::Precondition("markov split takes unmapped probes".into()));
            }
            let (pre, w): (Vec<C>, Vec<f64>) = match p.regime {
                Regime::Bulk => (0..q.circle_nodes)
                    .map(|a| {
                        let th = TAU * (a as f64 + 0.5) / q.circle_nodes as f64;
                        (p.centre + C::from_polar(p.scale, th), 1.0 / q.circle_nodes as f64)
                    })
                    .unzip(),
                Regime::Boundary => quad::gauss_on(q.semicircle_nodes, 0.0, PI)
                    .map(|(th, w)| (p.centre + C::from_polar(p.scale, th), w / PI))
                    .unzip(),
            };
            let mut img = Vec::with_capacity(pre.len());
            let mut logd = Vec::with_capacity(pre.len());
            for &z in &pre {
                let e = chain.unzip(z, 0.0, s).map_err(|e| match e {
                    Error::PointInHull(m) => Error::Domain(format!("probe node {m} is inside the hull")),
                    other => other,
                })?;
                img.push(e.value);
                logd.push(e.deriv.norm().ln());
            }
            check_continuity(&pre, &img, &logd, p.regime == Regime::Bulk)?;
            Ok(Nodes { pre, img, logd, w })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = sets.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (a, b) = (&sets[i], &sets[j]);
            let mut acc = 0.0;
            for x in 0..a.pre.len() {
                for y in 0..b.pre.len() {
                    let (u, v) = (a.pre[x], b.pre[y]);
                    let (fu, fv) = (a.img[x], b.img[y]);
                    let dist = if i == j && x == y {
                        a.logd[x]
                    } else {
                        ((fu - fv) / (u - v)).norm().ln()
                    };
                    acc += a.w[x] * b.w[y] * (dist + model.smooth(u, v) - model.smooth(fu, fv));
                }
            }
            m[(i, j)] = acc;
            m[(j, i)] = acc;
        }
    }
    Ok(m)
}
