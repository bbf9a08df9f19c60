use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C;

use super::model::Regime;
use crate::loewner::PlaneMap;

/// A single averaging functional: the uniform measure on the circle (bulk)
/// or upper semicircle (boundary) of radius `scale` about `centre`, pushed
/// forward by `map` when one is given.
#[derive(Clone)]
pub struct Probe {
    pub centre: C,
    pub scale: f64,
    pub regime: Regime,
    pub map: Option<Arc<dyn PlaneMap>>,
}

impl fmt::Debug for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Probe")
            .field("centre", &self.centre)
            .field("scale", &self.scale)
            .field("regime", &self.regime)
            .field("mapped", &self.map.is_some())
            .finish()
    }
}

impl Probe {
    pub fn bulk(centre: C, scale: f64) -> Self {
        Self { centre, scale, regime: Regime::Bulk, map: None }
    }

    pub fn boundary(x: f64, scale: f64) -> Self {
        Self { centre: C::new(x, 0.0), scale, regime: Regime::Boundary, map: None }
    }

    pub fn new(centre: C, scale: f64, regime: Regime) -> Self {
        Self { centre, scale, regime, map: None }
    }

    /// Pair with `h ∘ map` instead of `h`.
    pub fn pulled_back(mut self, map: Arc<dyn PlaneMap>) -> Self {
        self.map = Some(map);
        self
    }
}

/// Probes whose pairings are sampled jointly.
#[derive(Clone, Debug, Default)]
pub struct ProbeSet {
    pub probes: Vec<Probe>,
    /// Coefficient `Q` of the coordinate-change term `Q log|φ'|` added to
    /// the pairing of every mapped probe; zero disables it.
    pub log_derivative_offset: f64,
}

impl ProbeSet {
    pub fn new(probes: Vec<Probe>) -> Self {
        Self { probes, log_derivative_offset: 0.0 }
    }

    pub fn with_offset(mut self, q: f64) -> Self {
        self.log_derivative_offset = q;
        self
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}
