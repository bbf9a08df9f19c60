//! Conformal maps used to pull back probes and push forward measures.

use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64 as C;

use super::chain::{MapChain, MapEval};
use crate::error::Result;

/// A conformal map defined on (part of) the upper half-plane.
pub trait PlaneMap: Debug + Send + Sync {
    fn eval(&self, z: C) -> Result<MapEval>;

    /// `Some((λ, b))` when the map is exactly `z ↦ λz + b` with `λ > 0` and
    /// `b` real.
    fn similarity(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `φ_s^t`: maps time-`s` coordinates to time-`t` coordinates.
#[derive(Clone, Debug)]
pub struct Unzip {
    pub chain: Arc<MapChain>,
    pub s: f64,
    pub t: f64,
}

/// `φ_t^s`: maps time-`t` coordinates back to time-`s` coordinates.
#[derive(Clone, Debug)]
pub struct Zip {
    pub chain: Arc<MapChain>,
    pub t: f64,
    pub s: f64,
}

/// `z ↦ λz + b`.
#[derive(Clone, Copy, Debug)]
pub struct Similarity {
    pub lambda: f64,
    pub shift: f64,
}

impl PlaneMap for Unzip {
    fn eval(&self, z: C) -> Result<MapEval> {
        self.chain.unzip(z, self.s, self.t)
    }
}

impl PlaneMap for Zip {
    fn eval(&self, z: C) -> Result<MapEval> {
        self.chain.zip(z, self.t, self.s)
    }
}

impl PlaneMap for Similarity {
    fn eval(&self, z: C) -> Result<MapEval> {
        Ok(MapEval {
            value: self.lambda * z + self.shift,
            deriv: C::new(self.lambda, 0.0),
            landed: None,
            hull_distance: f64::INFINITY,
        })
    }

    fn similarity(&self) -> Option<(f64, f64)> {
        Some((self.lambda, self.shift))
    }
}

/// Composition `outer ∘ inner`.
#[derive(Clone, Debug)]
pub struct Compose {
    pub inner: Arc<dyn PlaneMap>,
    pub outer: Arc<dyn PlaneMap>,
}

impl PlaneMap for Compose {
    fn eval(&self, z: C) -> Result<MapEval> {
        let a = self.inner.eval(z)?;
        let b = self.outer.eval(a.value)?;
        Ok(MapEval {
            value: b.value,
            deriv: a.deriv * b.deriv,
            landed: a.landed.or(b.landed),
            hull_distance: a.hull_distance.min(b.hull_distance),
        })
    }

    fn similarity(&self) -> Option<(f64, f64)> {
        let (l1, b1) = self.inner.similarity()?;
        let (l2, b2) = self.outer.similarity()?;
        Some((l1 * l2, l2 * b1 + b2))
    }
}
