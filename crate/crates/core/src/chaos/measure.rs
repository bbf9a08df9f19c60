use std::io::Write;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the atoms of a measure live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// Along a curve, ordered by the curve's time parameter.
    Curve,
    /// On the real line, ordered by position.
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: C,
    pub weight: f64,
    /// Curve time (capacity time for SLE curves); `NaN` when not tracked.
    pub time: f64,
}

impl Atom {
    pub fn new(position: C, weight: f64) -> Self {
        Self { position, weight, time: f64::NAN }
    }

    pub fn timed(position: C, weight: f64, time: f64) -> Self {
        Self { position, weight, time }
    }
}

/// A finite sum of weighted point masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    /// Dimension `d` of the measure (1 for length, 2 for area, `1 + κ/8`
    /// for the natural parametrization).
    pub dim: f64,
    pub support: Support,
}

impl AtomicMeasure {
    /// Validates weights and sorts the atoms along the support.
    pub fn new(mut atoms: Vec<Atom>, dim: f64, support: Support) -> Result<Self> {
        if atoms.iter().any(|a| !(a.weight >= 0.0) || !a.weight.is_finite()) {
            return Err(Error::Precondition("atom weights must be finite and non-negative".into()));
        }
        match support {
            Support::Boundary => {
                if atoms.iter().any(|a| a.position.im != 0.0) {
                    return Err(Error::Precondition("boundary atoms must lie on the real line".into()));
                }
                atoms.sort_by(|a, b| a.position.re.total_cmp(&b.position.re));
            }
            Support::Curve => {
                if atoms.iter().all(|a| a.time.is_finite()) {
                    atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
                }
            }
        }
        Ok(Self { atoms, dim, support })
    }

    pub fn empty(dim: f64, support: Support) -> Self {
        Self { atoms: Vec::new(), dim, support }
    }

    /// Lebesgue measure on `[a, b]` discretised into cells of width at most
    /// `spacing`, one atom at each cell midpoint.
    pub fn lebesgue(a: f64, b: f64, spacing: f64) -> Result<Self> {
        if !(b > a) || !(spacing > 0.0) {
            return Err(Error::Precondition(format!("bad interval [{a}, {b}] or spacing {spacing}")));
        }
        let n = ((b - a) / spacing).ceil() as usize;
        let h = (b - a) / n as f64;
        let atoms = (0..n).map(|k| Atom::new(C::new(a + (k as f64 + 0.5) * h, 0.0), h)).collect();
        Self::new(atoms, 1.0, Support::Boundary)
    }

    /// Area measure on a rectangle, one atom per square cell of side `h`.
    pub fn area(re: (f64, f64), im: (f64, f64), h: f64) -> Result<Self> {
        let nx = ((re.1 - re.0) / h).round() as usize;
        let ny = ((im.1 - im.0) / h).round() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::Precondition("empty rectangle".into()));
        }
        let (hx, hy) = ((re.1 - re.0) / nx as f64, (im.1 - im.0) / ny as f64);
        let mut atoms = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let z = C::new(re.0 + (i as f64 + 0.5) * hx, im.0 + (j as f64 + 0.5) * hy);
                atoms.push(Atom::new(z, hx * hy));
            }
        }
        Self::new(atoms, 2.0, Support::Curve)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Mass of atoms whose time lies in `(lo, hi]`.
    pub fn mass_in_times(&self, lo: f64, hi: f64) -> f64 {
        self.atoms.iter().filter(|a| a.time > lo && a.time <= hi).map(|a| a.weight).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn with_weights(&self, w: &[f64]) -> Self {
        let mut m = self.clone();
        for (a, w) in m.atoms.iter_mut().zip(w) {
            a.weight = *w;
        }
        m
    }

    /// CSV export; `header` is written first as a `#` comment line.
    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&serde_json::Value>) -> Result<()> {
        if let Some(h) = header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "re,im,weight,time")?;
        for a in &self.atoms {
            writeln!(w, "{},{},{},{}", a.position.re, a.position.im, a.weight, a.time)?;
        }
        Ok(())
    }
}
