use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::q_of;
use crate::error::{Error, Result};
use crate::seed;

/// Entrance point of the conditioned branch.
pub const ENTRANCE: f64 = 1e-3;
const MAX_TRIES: usize = 1_000_000;

/// Radial part `A_t` of a wedge field on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Rejected attempts for the `t < 0` branch.
    pub rejections: usize,
}

/// `A_t = B_{2t} + αt` for `t > 0`; for `t < 0`, `A_t = B̂_{-2t} + αt`
/// with `B̂` conditioned on `A_t - Qt > 0`, sampled by rejection on the grid.
pub fn wedge_radial_path(alpha: f64, gamma: f64, t_grid: &[f64], seed: u64) -> Result<RadialPath> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::UnsupportedParameter(format!("gamma = {gamma} outside (0, 2)")));
    }
    let q = q_of(gamma);
    if !(alpha < q) {
        return Err(Error::UnsupportedParameter(format!("alpha = {alpha} must be below Q = {q}")));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite time".into()));
    }
    let mut rng = seed::rng(seed);
    let mut values = vec![0.0; t_grid.len()];

    let mut pos: Vec<usize> = (0..t_grid.len()).filter(|&i| t_grid[i] > 0.0).collect();
    pos.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let (mut b, mut last) = (0.0, 0.0);
    for i in pos {
        let t = t_grid[i];
        b += (2.0 * (t - last)).sqrt() * rng.sample::<f64, _>(StandardNormal);
        last = t;
        values[i] = b + alpha * t;
    }

    let mut neg: Vec<usize> = (0..t_grid.len()).filter(|&i| t_grid[i] < 0.0).collect();
    neg.sort_by(|&a, &b| t_grid[b].total_cmp(&t_grid[a]));
    let mut rejections = 0;
    if !neg.is_empty() {
        let drift = q - alpha;
        let mut path = vec![0.0; neg.len()];
        'attempt: loop {
            if rejections >= MAX_TRIES {
                return Err(Error::Model("conditioned radial branch: rejection cap reached".into()));
            }
            // X_u = B̂_{2u} + (Q - α) u started at the entrance point.
            let (mut x, mut last) = (ENTRANCE, 0.0);
            for (k, &i) in neg.iter().enumerate() {
                let u = -t_grid[i];
                let du = u - last;
                x += (2.0 * du).sqrt() * rng.sample::<f64, _>(StandardNormal) + drift * du;
                last = u;
                if x <= 0.0 {
                    rejections += 1;
                    continue 'attempt;
                }
                path[k] = x;
            }
            break;
        }
        for (k, &i) in neg.iter().enumerate() {
            // A_t = X_u - Q u with t = -u.
            values[i] = path[k] + q * t_grid[i];
        }
    }
    Ok(RadialPath { times: t_grid.to_vec(), values, rejections })
}
