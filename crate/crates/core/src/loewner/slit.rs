//! Vertical-slit maps: the exact Loewner flow for constant driving.

use num_complex::Complex64 as C;

/// Square root on the closed upper half-plane. On the real axis the sign of
/// `hint` picks the side, with `+` for a zero hint.
#[inline]
pub(crate) fn upper_sqrt(z: C, hint: f64) -> C {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re * hint < 0.0) {
        -s
    } else {
        s
    }
}

/// Flow of duration `cap` under constant driving `drive`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slit {
    pub drive: f64,
    pub cap: f64,
}

impl Slit {
    pub fn new(drive: f64, cap: f64) -> Self {
        Self { drive, cap }
    }

    pub fn height(&self) -> f64 {
        2.0 * self.cap.sqrt()
    }

    /// Euclidean distance from `z` to the slit `[drive, drive + i·height]`.
    #[inline]
    pub fn distance(&self, z: C) -> f64 {
        let u = z - self.drive;
        let h = self.height();
        if u.im <= 0.0 {
            u.norm()
        } else if u.im <= h {
            u.re.abs()
        } else {
            (u - C::new(0.0, h)).norm()
        }
    }

    /// `g(z) = W + sqrt((z - W)^2 + 4 cap)` written without cancellation.
    #[inline]
    pub fn forward(&self, z: C) -> (C, C) {
        if self.cap == 0.0 {
            return (z, C::new(1.0, 0.0));
        }
        let u = z - self.drive;
        let s = upper_sqrt(u * u + 4.0 * self.cap, u.re);
        (z + 4.0 * self.cap / (u + s), u / s)
    }

    /// `g^{-1}(w) = W + sqrt((w - W)^2 - 4 cap)`; real points inside the
    /// image interval land on the slit.
    #[inline]
    pub fn inverse(&self, w: C) -> (C, C) {
        if self.cap == 0.0 {
            return (w, C::new(1.0, 0.0));
        }
        let u = w - self.drive;
        let s = upper_sqrt(u * u - 4.0 * self.cap, u.re);
        (w - 4.0 * self.cap / (u + s), u / s)
    }

    /// Image of the real interval `[lo, hi]` (or of the empty set when
    /// `lo > hi`) together with the slit base.
    #[inline]
    pub fn grow_interval(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (lo, hi) = if lo > hi {
            (self.drive, self.drive)
        } else {
            (lo.min(self.drive), hi.max(self.drive))
        };
        let w = self.drive;
        let c4 = 4.0 * self.cap;
        (w - ((w - lo).powi(2) + c4).sqrt(), w + ((hi - w).powi(2) + c4).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip() {
        let s = Slit::new(0.3, 0.02);
        for z in [C::new(0.1, 0.5), C::new(-2.0, 0.01), C::new(5.0, 3.0), C::new(0.3, 1.0)] {
            let (w, d) = s.forward(z);
            let (back, db) = s.inverse(w);
            assert!((back - z).norm() < 1e-13, "{z} -> {w} -> {back}");
            assert!((d * db - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn real_points_stay_on_their_side() {
        let s = Slit::new(0.0, 0.25);
        let (w, _) = s.forward(C::new(-1e-3, 0.0));
        assert!(w.re < -1.0 && w.im == 0.0);
        let (w, _) = s.forward(C::new(1e-3, 0.0));
        assert!(w.re > 1.0 && w.im == 0.0);
    }

    #[test]
    fn interior_real_point_lands_on_slit() {
        let s = Slit::new(0.5, 1.0);
        let (z, _) = s.inverse(C::new(0.5 + 1.2, 0.0));
        assert!((z.re - 0.5).abs() < 1e-14);
        assert!((z.im - (4.0f64 - 1.44).sqrt()).abs() < 1e-14);
    }
}
