use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cov::probe_moments;
use super::model::CovarianceModel;
use super::probe::ProbeSet;
use crate::error::{Error, Result};
use crate::seed;

/// Relative tolerance for negative eigenvalues treated as round-off.
pub const PSD_TOL: f64 = 1e-9;

/// Jointly sampled probe pairings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
    /// `(centre, scale)` of each probe when known, for alignment checks.
    pub probes: Option<Vec<(C, f64)>>,
}

/// Factored Gaussian law `N(mean, Σ)` that can be sampled repeatedly.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    /// Row-major `n × n` factor `F` with `F Fᵀ = Σ`.
    factor: Vec<f64>,
    lower: bool,
    n: usize,
    /// Pivots or eigenvalues clipped to zero.
    pub repaired: usize,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>, mean: Vec<f64>) -> Result<Self> {
        let n = cov.nrows();
        if cov.ncols() != n || mean.len() != n {
            return Err(Error::Precondition(format!(
                "covariance is {}x{} but {} means were given",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("covariance has non-finite entries".into()));
        }
        let tol = PSD_TOL * cov.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if let Some((factor, repaired)) = semidefinite_cholesky(cov, tol) {
            return Ok(Self { mean, factor, lower: true, n, repaired });
        }
        let eig = SymmetricEigen::new(cov.clone());
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if min < -tol {
            return Err(Error::Model(format!("covariance is not positive semidefinite (eigenvalue {min:.3e})")));
        }
        let mut repaired = 0;
        let mut factor = vec![0.0; n * n];
        for k in 0..n {
            let lam = eig.eigenvalues[k];
            if lam < 0.0 {
                repaired += 1;
            }
            let s = lam.max(0.0).sqrt();
            for i in 0..n {
                factor[i * n + k] = eig.eigenvectors[(i, k)] * s;
            }
        }
        Ok(Self { mean, factor, lower: false, n, repaired })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Writes one draw into `out`, using `z` as scratch.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], z: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..self.n {
            let row = &self.factor[i * self.n..(i + 1) * self.n];
            let end = if self.lower { i + 1 } else { self.n };
            let dot: f64 = row[..end].iter().zip(&z[..end]).map(|(a, b)| a * b).sum();
            out[i] = self.mean[i] + dot;
        }
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let mut rng = seed::rng(seed);
        let mut out = vec![0.0; self.n];
        let mut z = vec![0.0; self.n];
        self.sample_into(&mut rng, &mut out, &mut z);
        FieldSample { values: out, seed, probes: None }
    }
}

/// Cholesky that zeroes pivots within `tol` of zero. Returns `None` when a
/// pivot is clearly negative.
fn semidefinite_cholesky(a: &DMatrix<f64>, tol: f64) -> Option<(Vec<f64>, usize)> {
    let n = a.nrows();
    let mut l = vec![0.0; n * n];
    let mut repaired = 0;
    for j in 0..n {
        let row_j = j * n;
        let d = a[(j, j)] - l[row_j..row_j + j].iter().map(|v| v * v).sum::<f64>();
        if d < -tol {
            return None;
        }
        if d <= tol {
            if d < 0.0 {
                repaired += 1;
            }
            // Column j stays zero; the remaining rows must not need it.
            for i in j + 1..n {
                let row_i = i * n;
                let s = a[(i, j)] - (0..j).map(|k| l[row_i + k] * l[row_j + k]).sum::<f64>();
                if s.abs() > (tol * a[(i, i)].abs().max(1.0)).sqrt() {
                    return None;
                }
            }
            continue;
        }
        let ljj = d.sqrt();
        l[row_j + j] = ljj;
        for i in j + 1..n {
            let row_i = i * n;
            let s = a[(i, j)] - (0..j).map(|k| l[row_i + k] * l[row_j + k]).sum::<f64>();
            l[row_i + j] = s / ljj;
        }
    }
    Some((l, repaired))
}

/// One draw of `N(means, cov)`.
pub fn sample_probes(cov: &DMatrix<f64>, means: &[f64], seed: u64) -> Result<FieldSample> {
    Ok(GaussianSampler::new(cov, means.to_vec())?.sample(seed))
}

/// Moments, factorisation and one draw for a probe set.
pub fn sample_field(model: &CovarianceModel, probes: &ProbeSet, seed: u64) -> Result<FieldSample> {
    let (cov, means) = probe_moments(model, probes)?;
    let mut s = sample_probes(&cov, &means, seed)?;
    s.probes = Some(probes.probes.iter().map(|p| (p.centre, p.scale)).collect());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_returns_means() {
        let cov = DMatrix::zeros(3, 3);
        let m = [0.1, -2.0, 3.5];
        let s = sample_probes(&cov, &m, 4).unwrap();
        assert_eq!(s.values, m);
    }

    #[test]
    fn indefinite_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sample_probes(&cov, &[0.0, 0.0], 1), Err(Error::Model(_))));
    }

    #[test]
    fn rank_deficient_is_accepted() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = sample_probes(&cov, &[0.0, 0.0], 3).unwrap();
        assert!((s.values[0] - s.values[1]).abs() < 1e-12);
    }
}
