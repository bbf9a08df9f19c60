use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{Atom, AtomicMeasure, Support};
use crate::error::{Error, Result};
use crate::loewner::TraceSample;
use crate::stats::{self, LinearFit};

/// Region in which neighbourhood area is counted: `exclusion ≤ |z| ≤ radius`
/// in the closed upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub radius: f64,
    pub exclusion: f64,
}

impl Window {
    pub const UNBOUNDED: Window = Window { radius: f64::INFINITY, exclusion: 0.0 };

    /// Unit half-disk minus the ball of radius `exclusion` about 0.
    pub fn unit_half_disk(exclusion: f64) -> Self {
        Self { radius: 1.0, exclusion }
    }

    #[inline]
    pub fn contains(&self, z: C) -> bool {
        let r = z.norm();
        z.im >= 0.0 && r <= self.radius && r >= self.exclusion
    }
}

/// Pixels per `ε` along each axis.
pub const PIXELS_PER_EPS: f64 = 8.0;
/// Largest admissible gap between consecutive trace points, in units of the
/// finest `ε`.
pub const MAX_GAP: f64 = 0.5;
/// Relative agreement of the last two scales that counts as stabilised.
pub const STABLE_TOL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentEstimate {
    pub d: f64,
    pub eps: Vec<f64>,
    pub window: Window,
    /// Capacity-time intervals `(a, b]` of the partition.
    pub segments: Vec<(f64, f64)>,
    /// `area[k][j]`: neighbourhood area at scale `eps[k]` owned by segment `j`.
    pub area: Vec<Vec<f64>>,
    /// `ε^{d-2}` times the area, per segment, at the finest scale.
    pub content: Vec<f64>,
    /// Whole-window content at each scale.
    pub total: Vec<f64>,
    /// `total[k] / total[k - 1]`.
    pub ratios: Vec<f64>,
    pub stabilized: bool,
    /// Fit of `log area` against `log ε`; the slope estimates `2 - d`.
    pub fit: Option<LinearFit>,
    pub max_gap: f64,
    /// The finest-scale content as a measure on the curve, one atom per
    /// polyline piece.
    pub measure: AtomicMeasure,
}

impl ContentEstimate {
    pub fn total_content(&self) -> f64 {
        self.content.iter().sum()
    }

    /// Per-segment content as CSV under a JSON header describing the
    /// estimate; the fields of `extra` (κ, seeds) are merged into it.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, extra: &serde_json::Value) -> Result<()> {
        let mut head = serde_json::json!({
            "d": self.d,
            "eps": self.eps,
            "window": self.window,
            "total": self.total,
            "ratios": self.ratios,
            "stabilized": self.stabilized,
            "slope": self.fit.as_ref().map(|f| f.slope),
            "max_gap": self.max_gap,
        });
        merge(&mut head, extra);
        writeln!(w, "# {head}")?;
        writeln!(w, "t0,t1,content")?;
        for ((a, b), c) in self.segments.iter().zip(&self.content) {
            writeln!(w, "{a},{b},{c}")?;
        }
        Ok(())
    }
}

/// Copies the fields of `extra`, when it is an object, into `head`.
pub(crate) fn merge(head: &mut serde_json::Value, extra: &serde_json::Value) {
    if let (Some(h), Some(e)) = (head.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            h.insert(k.clone(), v.clone());
        }
    }
}

/// `n` equal capacity intervals covering `[a, b]`.
pub fn equal_segments(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|k| (a + (b - a) * k as f64 / n as f64, a + (b - a) * (k + 1) as f64 / n as f64)).collect()
}

/// Index of the segment `(a, b]` containing `t`; the first segment is closed.
pub fn segment_of(segments: &[(f64, f64)], t: f64) -> Option<usize> {
    segments.iter().position(|&(a, b)| (t > a || (t == a && a == segments[0].0)) && t <= b)
}

struct Owned {
    area: Vec<f64>,
    per_piece: Vec<f64>,
    piece_time: Vec<f64>,
}

fn neighbourhood(pts: &[(f64, C)], eps: f64, window: Window, segments: &[(f64, f64)]) -> Owned {
    let h = eps / PIXELS_PER_EPS;
    let npieces = pts.len().saturating_sub(1).max(1);
    let mut area = vec![0.0; segments.len()];
    let mut per_piece = vec![0.0; npieces];
    let piece_time: Vec<f64> = if pts.len() == 1 {
        vec![pts[0].0]
    } else {
        pts.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)).collect()
    };
    if pts.is_empty() {
        return Owned { area, per_piece: Vec::new(), piece_time: Vec::new() };
    }
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (_, z) in pts {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y1 = y1.max(z.im);
    }
    x0 -= eps;
    x1 += eps;
    y1 += eps;
    if window.radius.is_finite() {
        x0 = x0.max(-window.radius);
        x1 = x1.min(window.radius);
        y1 = y1.min(window.radius);
    }
    if !(x1 > x0 && y1 > 0.0) {
        return Owned { area, per_piece, piece_time };
    }
    let nx = ((x1 - x0) / h).ceil() as usize;
    let ny = (y1 / h).ceil() as usize;
    let mut best = vec![f64::INFINITY; nx * ny];
    // Owner piece and the time of the nearest point on it.
    let mut owner = vec![(u32::MAX, 0.0f64); nx * ny];
    let e2 = eps * eps;
    let pieces: Vec<(usize, (f64, C), (f64, C))> = if pts.len() == 1 {
        vec![(0, pts[0], pts[0])]
    } else {
        pts.windows(2).enumerate().map(|(k, w)| (k, w[0], w[1])).collect()
    };
    for (k, (ta, a), (tb, b)) in pieces {
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let lo_x = ((a.re.min(b.re) - eps - x0) / h).floor().max(0.0) as usize;
        let hi_x = (((a.re.max(b.re) + eps - x0) / h).ceil() as usize).min(nx);
        let lo_y = ((a.im.min(b.im) - eps) / h).floor().max(0.0) as usize;
        let hi_y = (((a.im.max(b.im) + eps) / h).ceil() as usize).min(ny);
        for i in lo_x..hi_x {
            let px = x0 + (i as f64 + 0.5) * h;
            for j in lo_y..hi_y {
                let p = C::new(px, (j as f64 + 0.5) * h);
                let u = if len2 > 0.0 { (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0) } else { 0.0 };
                let d2 = (p - (a + ab * u)).norm_sqr();
                let cell = i * ny + j;
                if d2 < e2 && d2 < best[cell] {
                    best[cell] = d2;
                    owner[cell] = (k as u32, ta + (tb - ta) * u);
                }
            }
        }
    }
    let cell_area = h * h;
    for i in 0..nx {
        let px = x0 + (i as f64 + 0.5) * h;
        for j in 0..ny {
            let (k, t) = owner[i * ny + j];
            if k == u32::MAX || !window.contains(C::new(px, (j as f64 + 0.5) * h)) {
                continue;
            }
            per_piece[k as usize] += cell_area;
            if let Some(s) = segment_of(segments, t) {
                area[s] += cell_area;
            }
        }
    }
    Owned { area, per_piece, piece_time }
}

/// `ε^{d-2}` times the area of the `ε`-neighbourhood of the trace inside
/// `window`, split by the capacity-time segment owning the nearest curve
/// point. Each pixel has exactly one owner, so segment values add up to the
/// whole. An empty `segments` list means one segment spanning the trace.
pub fn minkowski_content(
    trace: &TraceSample,
    d: f64,
    eps_schedule: &[f64],
    window: Window,
    segments: &[(f64, f64)],
) -> Result<ContentEstimate> {
    if !(1.0..=1.5).contains(&d) {
        return Err(Error::UnsupportedParameter(format!("dimension {d} outside [1, 1.5]")));
    }
    if eps_schedule.is_empty() || eps_schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Precondition("scales must be positive".into()));
    }
    let pts: Vec<(f64, C)> = trace.resolved().collect();
    let segments: Vec<(f64, f64)> = if segments.is_empty() {
        match (pts.first(), pts.last()) {
            (Some(a), Some(b)) => vec![(a.0, b.0)],
            _ => vec![(0.0, 0.0)],
        }
    } else {
        segments.to_vec()
    };
    let max_gap = pts.windows(2).map(|w| (w[1].1 - w[0].1).norm()).fold(0.0, f64::max);
    let finest = eps_schedule.iter().copied().fold(f64::INFINITY, f64::min);
    if max_gap > MAX_GAP * finest {
        return Err(Error::Resolution(format!(
            "trace gap {max_gap:.3e} exceeds {MAX_GAP} x eps = {:.3e}",
            MAX_GAP * finest
        )));
    }
    let owned: Vec<Owned> = eps_schedule.par_iter().map(|&e| neighbourhood(&pts, e, window, &segments)).collect();
    let k = eps_schedule.len();
    let fin = eps_schedule[k - 1];
    let area: Vec<Vec<f64>> = owned.iter().map(|o| o.area.clone()).collect();
    let total: Vec<f64> = area
        .iter()
        .zip(eps_schedule)
        .map(|(a, e)| a.iter().sum::<f64>() * e.powf(d - 2.0))
        .collect();
    let ratios: Vec<f64> = total.windows(2).map(|w| w[1] / w[0]).collect();
    let stabilized = ratios.last().is_some_and(|r| (r - 1.0).abs() < STABLE_TOL);
    let fit = (k >= 2 && area.iter().all(|a| a.iter().sum::<f64>() > 0.0)).then(|| {
        let x: Vec<f64> = eps_schedule.iter().map(|e| e.ln()).collect();
        let y: Vec<f64> = area.iter().map(|a| a.iter().sum::<f64>().ln()).collect();
        stats::linear_fit(&x, &y)
    });
    let scale = fin.powf(d - 2.0);
    let last = &owned[k - 1];
    let atoms = last
        .per_piece
        .iter()
        .zip(&last.piece_time)
        .enumerate()
        .filter(|(_, (w, _))| **w > 0.0)
        .map(|(i, (w, t))| {
            let z = if pts.len() == 1 { pts[0].1 } else { 0.5 * (pts[i].1 + pts[i + 1].1) };
            Atom::timed(z, w * scale, *t)
        })
        .collect();
    Ok(ContentEstimate {
        d,
        eps: eps_schedule.to_vec(),
        window,
        content: area[k - 1].iter().map(|a| a * scale).collect(),
        segments,
        area,
        total,
        ratios,
        stabilized,
        fit,
        max_gap,
        measure: AtomicMeasure::new(atoms, d, Support::Curve)?,
    })
}

/// Slope of `log area` against `log ε` pooled over several traces.
pub fn dimension_fit(estimates: &[ContentEstimate]) -> Option<LinearFit> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for est in estimates {
        for (e, a) in est.eps.iter().zip(&est.area) {
            let s: f64 = a.iter().sum();
            if s > 0.0 {
                x.push(e.ln());
                y.push(s.ln());
            }
        }
    }
    (x.len() >= 2).then(|| stats::linear_fit(&x, &y))
}
