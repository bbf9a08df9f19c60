//! Quadrature rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_on(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    x.into_iter().zip(w).map(move |(x, w)| (m + h * x, h * w))
}

/// Adaptive Gauss–Legendre: bisects until a 15-point rule on each half
/// agrees with the rule on the whole interval to `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(15);
    }
    fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, x: &[f64], w: &[f64]) -> f64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        x.iter().zip(w).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32, x: &[f64], w: &[f64]) -> f64 {
        let m = 0.5 * (a + b);
        let l = panel(f, a, m, x, w);
        let r = panel(f, m, b, x, w);
        let diff = (l + r - whole).abs();
        // Stop once the panel error is at rounding level, where halving the
        // tolerance further can never succeed.
        if depth == 0 || !(diff > tol) || diff <= 1e-14 * (l.abs() + r.abs()) || b - a <= 1e-13 * (a.abs() + b.abs()) {
            l + r
        } else {
            rec(f, a, m, l, 0.5 * tol, depth - 1, x, w) + rec(f, m, b, r, 0.5 * tol, depth - 1, x, w)
        }
    }
    if a == b {
        return 0.0;
    }
    RULE.with(|(x, w)| {
        let whole = panel(f, a, b, x, w);
        rec(f, a, b, whole, tol, 40, x, w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let v = adaptive(&|x: f64| x.ln(), 0.0, 1.0, 1e-12);
        assert!((v + 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn smooth_integrand() {
        let v: f64 = gauss_on(24, 0.0, PI).map(|(t, w)| w * t.sin()).sum();
        assert!((v - 2.0).abs() < 1e-14);
    }
}
