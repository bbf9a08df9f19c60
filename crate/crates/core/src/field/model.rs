//! Covariance kernels and their exact circle averages.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Bulk probes average over circles; boundary probes over semicircles
/// centred on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Bulk,
    Boundary,
}

impl Regime {
    /// Exponent `n` in `Var ≈ -n log ε`.
    pub fn log_order(self) -> f64 {
        match self {
            Regime::Bulk => 1.0,
            Regime::Boundary => 2.0,
        }
    }
}

/// Uniform probability density on a disk, used to fix the additive
/// constant of the Neumann field through `(h, ρ) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskRho {
    pub centre: C,
    pub radius: f64,
}

impl DiskRho {
    /// Unit-area disk centred at `(√t + 1) i`.
    pub fn standard(t: f64) -> Self {
        Self { centre: C::new(0.0, t.max(0.0).sqrt() + 1.0), radius: 1.0 / PI.sqrt() }
    }

    /// `U(u) = ∫ ρ(x) (-log|x - u|) dx`.
    pub fn potential(&self, u: C) -> f64 {
        let d = (u - self.centre).norm();
        if d >= self.radius {
            -d.ln()
        } else {
            -self.radius.ln() + 0.5 * (1.0 - (d / self.radius).powi(2))
        }
    }

    /// `Φ(u) = ∫ ρ(x) G(x, u) dx = U(u) + U(ū)`.
    pub fn phi(&self, u: C) -> f64 {
        self.potential(u) + self.potential(u.conj())
    }

    /// `∬ ρ G ρ`.
    pub fn energy(&self) -> f64 {
        -self.radius.ln() + 0.25 - (2.0 * self.centre.im).ln()
    }

    /// Average of `U` over the circle of radius `r` about `z`.
    pub fn circle_avg_potential(&self, z: C, r: f64) -> f64 {
        let d = (z - self.centre).norm();
        let a = self.radius;
        if d >= a + r {
            -d.ln()
        } else if d + r <= a {
            -a.ln() + 0.5 * (1.0 - (d * d + r * r) / (a * a))
        } else if d + a <= r {
            -r.ln()
        } else {
            quad::adaptive(&|th: f64| self.potential(z + C::from_polar(r, th)), 0.0, TAU, 1e-13) / TAU
        }
    }

    /// Average of `Φ` over the circle of radius `r` about `z`.
    pub fn circle_avg_phi(&self, z: C, r: f64) -> f64 {
        self.circle_avg_potential(z, r) + self.circle_avg_potential(z.conj(), r)
    }
}

/// Law of the field being probed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldLaw {
    /// Zero boundary values on the real line.
    Dirichlet,
    /// Free boundary, normalised by `(h, ρ) = 0`.
    Neumann(DiskRho),
    /// Free-boundary field on the unit half-disk normalised to have zero
    /// average on the unit semicircle, plus the drift `-α log|z|`.
    Wedge { alpha: f64, gamma: f64 },
}

/// How probes average the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mollifier {
    /// Uniform measure on circles and semicircles.
    Circle,
    /// Radial polynomial bump `(1 - s²)²` on disks and half-disks.
    Bump,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    /// Trapezoid nodes on a mapped circle.
    pub circle_nodes: usize,
    /// Gauss–Legendre nodes on a mapped semicircle.
    pub semicircle_nodes: usize,
    /// Node multiplier used when a self-check doubles the resolution.
    pub refine: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { circle_nodes: 32, semicircle_nodes: 24, refine: 2 }
    }
}

impl Quadrature {
    pub fn refined(self) -> Self {
        Self {
            circle_nodes: self.circle_nodes * self.refine,
            semicircle_nodes: self.semicircle_nodes * self.refine,
            refine: self.refine,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub law: FieldLaw,
    pub mollifier: Mollifier,
    pub quadrature: Quadrature,
}

/// `Q = γ/2 + 2/γ`.
pub fn q_of(gamma: f64) -> f64 {
    gamma / 2.0 + 2.0 / gamma
}

/// Free-boundary Green's function `G(z, w) = -log|z - w| - log|z - w̄|`.
pub fn green_neumann(z: C, w: C) -> f64 {
    -(z - w).norm().ln() - (z - w.conj()).norm().ln()
}

/// Average over the circle `|u - c| = r` of `log max(|u - p|, e)`.
pub fn logmax_circle_avg(c: C, r: f64, p: C, e: f64) -> f64 {
    let d = (p - c).norm();
    if d >= r + e {
        return d.ln();
    }
    if d + r <= e {
        return e.ln();
    }
    if d + e <= r {
        return r.ln();
    }
    // The circle crosses the clamp disk: |u - p| < e on an arc of half-width
    // beta about the direction of p.
    let beta = 2.0 * ((e * e - (r - d).powi(2)) / (4.0 * r * d)).clamp(0.0, 1.0).sqrt().asin();
    // |u - p|² = (r - d)² + 4rd sin²(ψ/2), free of cancellation near p.
    let f = |psi: f64| 0.5 * ((r - d).powi(2) + 4.0 * r * d * (0.5 * psi).sin().powi(2)).max(e * e).ln();
    let outside = quad::adaptive(&f, beta, PI, 1e-14);
    (beta * e.ln() + outside) / PI
}

impl CovarianceModel {
    pub fn new(law: FieldLaw) -> Self {
        Self { law, mollifier: Mollifier::Circle, quadrature: Quadrature::default() }
    }

    pub fn dirichlet() -> Self {
        Self::new(FieldLaw::Dirichlet)
    }

    pub fn neumann(rho: DiskRho) -> Self {
        Self::new(FieldLaw::Neumann(rho))
    }

    pub fn wedge(alpha: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::UnsupportedParameter(format!("gamma = {gamma} outside (0, 2)")));
        }
        let q = q_of(gamma);
        if !(alpha < q) {
            return Err(Error::UnsupportedParameter(format!("alpha = {alpha} must be below Q = {q}")));
        }
        Ok(Self::new(FieldLaw::Wedge { alpha, gamma }))
    }

    pub fn with_mollifier(mut self, m: Mollifier) -> Self {
        self.mollifier = m;
        self
    }

    pub fn with_quadrature(mut self, q: Quadrature) -> Self {
        self.quadrature = q;
        self
    }

    /// Whether the kernel is even under conjugating one argument.
    pub fn reflection_symmetric(&self) -> bool {
        !matches!(self.law, FieldLaw::Dirichlet)
    }

    pub(crate) fn check_point(&self, u: C) -> Result<()> {
        if let FieldLaw::Wedge { .. } = self.law {
            if u.norm() > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("{u} lies outside the unit half-disk")));
            }
        }
        Ok(())
    }

    /// Pointwise covariance `K(z, w)`.
    pub fn kernel(&self, z: C, w: C) -> Result<f64> {
        if z == w {
            return Err(Error::DiagonalSingularity);
        }
        if z.im < 0.0 || w.im < 0.0 {
            return Err(Error::Domain("kernel arguments must lie in the closed upper half-plane".into()));
        }
        self.check_point(z)?;
        self.check_point(w)?;
        Ok(self.kernel_raw(z, w))
    }

    /// Kernel without argument checks; valid for any `z ≠ w`, extending the
    /// reflection-symmetric kernels evenly to the lower half-plane.
    #[inline]
    pub(crate) fn kernel_raw(&self, z: C, w: C) -> f64 {
        -(z - w).norm().ln() + self.smooth(z, w)
    }

    /// `K(u, v) + log|u - v|`, finite on the diagonal off the real line.
    #[inline]
    pub(crate) fn smooth(&self, u: C, v: C) -> f64 {
        let refl = (u - v.conj()).norm().ln();
        match self.law {
            FieldLaw::Dirichlet => refl,
            FieldLaw::Wedge { .. } => -refl,
            FieldLaw::Neumann(rho) => -refl - rho.phi(u) - rho.phi(v) + rho.energy(),
        }
    }

    /// Mean of the field at `u`.
    #[inline]
    pub fn mean_at(&self, u: C) -> f64 {
        match self.law {
            FieldLaw::Wedge { alpha, .. } => -alpha * u.norm().ln(),
            _ => 0.0,
        }
    }

    /// Mean paired with a circle (bulk) or semicircle (boundary) probe.
    pub fn probe_mean(&self, centre: C, eps: f64) -> f64 {
        match self.law {
            FieldLaw::Wedge { alpha, .. } => -alpha * centre.norm().max(eps).ln(),
            _ => 0.0,
        }
    }

    /// Average of `K(·, v)` over an unmapped probe.
    pub(crate) fn probe_avg(&self, regime: Regime, c: C, eps: f64, v: C) -> f64 {
        match (regime, self.law) {
            (Regime::Bulk, law) => {
                let near = -(c - v).norm().max(eps).ln();
                let far = (c - v.conj()).norm().max(eps).ln();
                match law {
                    FieldLaw::Dirichlet => near + far,
                    FieldLaw::Wedge { .. } => near - far,
                    FieldLaw::Neumann(rho) => {
                        near - far - rho.circle_avg_phi(c, eps) - rho.phi(v) + rho.energy()
                    }
                }
            }
            (Regime::Boundary, FieldLaw::Dirichlet) => {
                let f = |th: f64| {
                    let u = c + C::from_polar(eps, th);
                    if u == v {
                        0.0
                    } else {
                        self.kernel_raw(u, v)
                    }
                };
                quad::adaptive(&f, 0.0, PI, 1e-12) / PI
            }
            (Regime::Boundary, law) => {
                let g = -2.0 * (c - v).norm().max(eps).ln();
                match law {
                    FieldLaw::Neumann(rho) => g - rho.circle_avg_phi(c, eps) - rho.phi(v) + rho.energy(),
                    _ => g,
                }
            }
        }
    }

    /// Covariance of two unmapped probes with the same mollifier radius
    /// profile `(c, ε)`.
    pub(crate) fn pair_closed(&self, a: (Regime, C, f64), b: (Regime, C, f64)) -> f64 {
        let (ra, ca, ea) = a;
        let (rb, cb, eb) = b;
        match self.law {
            FieldLaw::Dirichlet => match (ra, rb) {
                (Regime::Bulk, Regime::Bulk) => {
                    -logmax_circle_avg(cb, eb, ca, ea) + (ca - cb.conj()).norm().ln()
                }
                (Regime::Boundary, Regime::Bulk) => self.pair_closed(b, a),
                (Regime::Bulk, Regime::Boundary) => {
                    // circle average of K(·, v) is closed form; integrate v over the semicircle
                    let f = |th: f64| self.probe_avg(Regime::Bulk, ca, ea, cb + C::from_polar(eb, th));
                    quad::adaptive(&f, 0.0, PI, 1e-12) / PI
                }
                (Regime::Boundary, Regime::Boundary) => dirichlet_semicircle_pair(ca, ea, cb, eb),
            },
            law => {
                // Semicircle averages of reflection-symmetric kernels equal
                // full-circle averages.
                let g = match (ra, rb) {
                    (Regime::Bulk, Regime::Bulk) => {
                        -logmax_circle_avg(cb, eb, ca, ea) - (ca - cb.conj()).norm().ln()
                    }
                    (Regime::Bulk, Regime::Boundary) => -2.0 * logmax_circle_avg(ca, ea, cb, eb),
                    (Regime::Boundary, Regime::Bulk) => -2.0 * logmax_circle_avg(cb, eb, ca, ea),
                    (Regime::Boundary, Regime::Boundary) => -2.0 * logmax_circle_avg(cb, eb, ca, ea),
                };
                match law {
                    FieldLaw::Neumann(rho) => {
                        g - rho.circle_avg_phi(ca, ea) - rho.circle_avg_phi(cb, eb) + rho.energy()
                    }
                    _ => g,
                }
            }
        }
    }
}

/// `E_semi = ∬ -log|e^{iθ} - e^{iθ'}| dθ dθ' / π²` over the upper unit
/// semicircle, `7ζ(3) / (2π²)`.
pub const SEMICIRCLE_ENERGY: f64 = 0.426_278_577_601_659_6;

/// Covariance of two Dirichlet semicircle probes, by nested quadrature
/// with the self-energy subtracted analytically.
fn dirichlet_semicircle_pair(ca: C, ea: f64, cb: C, eb: f64) -> f64 {
    let same = ca == cb && ea == eb;
    let outer = |th: f64| {
        let u = ca + C::from_polar(ea, th);
        let inner = |ph: f64| {
            let v = cb + C::from_polar(eb, ph);
            let refl = (u - v.conj()).norm().ln();
            if same {
                refl
            } else {
                -(u - v).norm().ln() + refl
            }
        };
        quad::adaptive(&inner, 0.0, PI, 1e-11) / PI
    };
    let v = quad::adaptive(&outer, 0.0, PI, 1e-10) / PI;
    if same {
        v - ea.ln() + SEMICIRCLE_ENERGY
    } else {
        v
    }
}
