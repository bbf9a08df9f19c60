use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Driving function sampled on the uniform grid `t_k = k·dt`.
///
/// The chain built from a path holds the left-endpoint value `values[k]` on
/// `(t_k, t_{k+1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingPath {
    /// Diffusivity used by the sampler; `None` for hand-built paths.
    pub kappa: Option<f64>,
    pub dt: f64,
    pub values: Vec<f64>,
}

pub(crate) fn grid_len(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidGrid(format!("horizon = {horizon} must be non-negative")));
    }
    // Tolerate T/dt landing a hair above an integer.
    Ok((horizon / dt - 1e-9).ceil().max(0.0) as usize)
}

impl DrivingPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if values.is_empty() {
            return Err(Error::InvalidGrid("a path needs at least the value at t = 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite driving value".into()));
        }
        Ok(Self { kappa: None, dt, values })
    }

    /// `W ≡ c` on `[0, horizon]`.
    pub fn constant(c: f64, dt: f64, horizon: f64) -> Result<Self> {
        let n = grid_len(dt, horizon)?;
        Self::new(dt, vec![c; n + 1])
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    /// Brownian scaling `t ↦ λ^{-1} W(λ² t)`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        Self {
            kappa: self.kappa,
            dt: self.dt / (lambda * lambda),
            values: self.values.iter().map(|w| w / lambda).collect(),
        }
    }

    /// Restriction to `[0, horizon]`.
    pub fn truncated(&self, horizon: f64) -> Result<Self> {
        let n = grid_len(self.dt, horizon)?.min(self.steps());
        Ok(Self { kappa: self.kappa, dt: self.dt, values: self.values[..=n].to_vec() })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `W_t = sqrt(κ) B_t` on `0, dt, …, ⌈T/dt⌉·dt`, reproducible per seed.
pub fn sample_sle_driving(kappa: f64, dt: f64, horizon: f64, seed: u64) -> Result<DrivingPath> {
    if !(0.0..4.0).contains(&kappa) {
        return Err(Error::UnsupportedParameter(format!(
            "kappa = {kappa}; only 0 <= kappa < 4 is supported"
        )));
    }
    let n = grid_len(dt, horizon)?;
    let mut rng = seed::rng(seed);
    let sd = (kappa * dt).sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n {
        let g: f64 = StandardNormal.sample(&mut rng);
        w += sd * g;
        values.push(w);
    }
    Ok(DrivingPath { kappa: Some(kappa), dt, values })
}
