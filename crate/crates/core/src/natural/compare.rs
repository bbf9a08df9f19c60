use serde::{Deserialize, Serialize};

use super::minkowski::segment_of;
use crate::chaos::AtomicMeasure;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `a / b` per segment with positive `b` mass.
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// Sample coefficient of variation of the ratios.
    pub cv: f64,
    /// Segments skipped because `b` had no mass there.
    pub excluded: usize,
    /// CV expected from the standard errors of `a` alone, when known.
    pub noise_cv: Option<f64>,
    pub threshold: f64,
    pub proportional: bool,
}

/// Default CV below which two measures count as proportional.
pub const PROPORTIONAL_CV: f64 = 0.25;

/// Mass of each capacity-time segment.
pub fn segment_masses(m: &AtomicMeasure, segments: &[(f64, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; segments.len()];
    for a in &m.atoms {
        if let Some(j) = segment_of(segments, a.time) {
            out[j] += a.weight;
        }
    }
    out
}

/// The measure without atoms whose time falls in one of `intervals`
/// (closed), for removing the same stretches of curve from both sides of a
/// comparison.
pub fn mask_times(m: &AtomicMeasure, intervals: &[(f64, f64)]) -> AtomicMeasure {
    let keep = |t: f64| !intervals.iter().any(|&(lo, hi)| lo <= t && t <= hi);
    AtomicMeasure { atoms: m.atoms.iter().filter(|a| keep(a.time)).cloned().collect(), ..m.clone() }
}

/// Ratio statistics of two measures on the same curve, segment by segment.
pub fn compare_measures(a: &AtomicMeasure, b: &AtomicMeasure, segments: &[(f64, f64)]) -> Result<Comparison> {
    compare_segment_masses(&segment_masses(a, segments), &segment_masses(b, segments), None)
}

/// [`compare_measures`] on precomputed segment masses; `a_se` adds the
/// Monte Carlo noise floor of the CV.
pub fn compare_segment_masses(a: &[f64], b: &[f64], a_se: Option<&[f64]>) -> Result<Comparison> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} segments against {}", a.len(), b.len())));
    }
    let keep: Vec<usize> = (0..a.len()).filter(|&j| b[j] > 0.0).collect();
    let ratios: Vec<f64> = keep.iter().map(|&j| a[j] / b[j]).collect();
    let mean = stats::mean(&ratios);
    let cv = if ratios.len() >= 2 { stats::cv(&ratios) } else { f64::NAN };
    let noise_cv = a_se.map(|se| {
        let rel: Vec<f64> = keep.iter().map(|&j| (se[j] / a[j]).powi(2)).collect();
        stats::mean(&rel).sqrt()
    });
    Ok(Comparison {
        excluded: a.len() - keep.len(),
        proportional: cv < PROPORTIONAL_CV,
        threshold: PROPORTIONAL_CV,
        ratios,
        mean,
        cv,
        noise_cv,
    })
}
