use std::io::Write;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::chain::MapChain;
use super::driving::DrivingPath;
use crate::error::{Error, Result};

/// Default vertical lift used to regularise the tip.
pub const EPS_LIFT: f64 = 1e-4;

/// Curve points `η(t) ≈ g_t^{-1}(W_t + i·eps_lift)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub times: Vec<f64>,
    pub points: Vec<C>,
    /// Indices whose evaluation blew up; their points are NaN.
    pub unresolved: Vec<usize>,
    pub eps_lift: f64,
}

impl TraceSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Resolved `(t, η(t))` pairs.
    pub fn resolved(&self) -> impl Iterator<Item = (f64, C)> + '_ {
        self.times.iter().zip(&self.points).filter(|(_, z)| z.re.is_finite()).map(|(&t, &z)| (t, z))
    }

    /// Prefix of the trace up to its first point outside `|z| < radius`.
    pub fn until_exit(&self, radius: f64) -> TraceSample {
        let n = self
            .points
            .iter()
            .position(|z| !(z.norm() < radius))
            .unwrap_or(self.points.len());
        TraceSample {
            times: self.times[..n].to_vec(),
            points: self.points[..n].to_vec(),
            unresolved: self.unresolved.iter().copied().filter(|&i| i < n).collect(),
            eps_lift: self.eps_lift,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,re,im")?;
        for (t, z) in self.times.iter().zip(&self.points) {
            writeln!(w, "{t},{},{}", z.re, z.im)?;
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

/// Trace of the chain built from `path` at the given capacity times.
pub fn compute_trace(path: &DrivingPath, times: &[f64], eps_lift: f64) -> Result<TraceSample> {
    let chain = MapChain::from_driving(path)?;
    trace_of_chain(&chain, times, eps_lift)
}

/// Trace of an existing chain. Points whose pull-back is not finite are
/// reported as unresolved rather than failing the whole call.
pub fn trace_of_chain(chain: &MapChain, times: &[f64], eps_lift: f64) -> Result<TraceSample> {
    if !(eps_lift > 0.0) {
        return Err(Error::Precondition(format!("eps_lift = {eps_lift} must be positive")));
    }
    let scale = 1e6 * (1.0 + chain.max_abs_drive() + chain.horizon().sqrt());
    let mut points = Vec::with_capacity(times.len());
    let mut unresolved = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let z = tip(chain, t, eps_lift);
        match z {
            Ok(z) if z.re.is_finite() && z.im.is_finite() && z.norm() < scale => points.push(z),
            Ok(_) | Err(Error::TraceUnresolved(_)) => {
                unresolved.push(i);
                points.push(C::new(f64::NAN, f64::NAN));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TraceSample { times: times.to_vec(), points, unresolved, eps_lift })
}

/// Single tip point. At `t = 0` this is the starting point `W_0`.
pub fn tip(chain: &MapChain, t: f64, eps_lift: f64) -> Result<C> {
    let w = chain.drive_at(t)?;
    if t == 0.0 {
        return Ok(C::new(w, 0.0));
    }
    Ok(chain.inverse(C::new(w, eps_lift), 0.0, t)?.value)
}

/// Piece boundaries refined by `substeps` partial times per piece. Within a
/// piece the new slit has height `2√δ` after time `δ`, so the partial times
/// are spaced quadratically to give steps of equal height.
pub fn grid_times(chain: &MapChain, substeps: usize) -> Vec<f64> {
    let b = chain.boundaries();
    let m = substeps.max(1);
    let mut out = Vec::with_capacity((b.len() - 1) * m + 1);
    out.push(0.0);
    for w in b.windows(2) {
        for j in 1..m {
            out.push(w[0] + (w[1] - w[0]) * (j as f64 / m as f64).powi(2));
        }
        out.push(w[1]);
    }
    out
}

/// Deepest bisection used by [`hull_trace`].
const MAX_DEPTH: u32 = 16;

/// Trace through every piece of the chain up to time `until`, refined until
/// consecutive points are at most `max_gap` apart. A jump of the driving
/// value between pieces attaches the next slit to the side of the previous
/// one rather than at its tip; that stretch of hull boundary is traced too,
/// with points labelled by the boundary time, so the polyline follows the
/// hull without gaps.
pub fn hull_trace(chain: &MapChain, until: f64, max_gap: f64, eps_lift: f64) -> Result<TraceSample> {
    hull_trace_inner(chain, until, f64::INFINITY, max_gap, eps_lift)
}

/// [`hull_trace`] stopped at the first point outside `|z| < radius`, which
/// is kept as the last point.
pub fn hull_trace_to_exit(chain: &MapChain, radius: f64, max_gap: f64, eps_lift: f64) -> Result<TraceSample> {
    let mut tr = hull_trace_inner(chain, chain.horizon(), radius, max_gap, eps_lift)?;
    let n = tr.points.iter().position(|z| z.norm() >= radius).map_or(tr.points.len(), |i| i + 1);
    tr.times.truncate(n);
    tr.points.truncate(n);
    tr.unresolved.retain(|&i| i < n);
    Ok(tr)
}

fn hull_trace_inner(chain: &MapChain, until: f64, radius: f64, max_gap: f64, eps_lift: f64) -> Result<TraceSample> {
    if !(max_gap > 0.0) {
        return Err(Error::Precondition(format!("max_gap = {max_gap} must be positive")));
    }
    let b = chain.boundaries();
    let steps = chain.steps();
    let mut times = vec![0.0];
    let mut points = vec![tip(chain, 0.0, eps_lift)?];
    let mut unresolved = Vec::new();
    for k in 0..steps.len() {
        let (t0, t1) = (b[k], b[k + 1].min(until));
        if t0 >= until {
            break;
        }
        let start = points.len();
        if k > 0 && steps[k].drive != steps[k - 1].drive {
            let (wa, wb) = (steps[k - 1].drive, steps[k].drive);
            let lift = |s: f64| chain.inverse(C::new(wa + (wb - wa) * s * s, eps_lift), 0.0, t0).map(|e| e.value);
            let end = lift(1.0)?;
            refine(&lift, 0.0, 1.0, *points.last().unwrap(), end, max_gap, MAX_DEPTH, &mut |_, z| {
                times.push(t0);
                points.push(z);
            })?;
        }
        // Slit height grows like the square root of elapsed time.
        let along = |s: f64| tip(chain, t0 + (t1 - t0) * s * s, eps_lift);
        let end = along(1.0)?;
        refine(&along, 0.0, 1.0, *points.last().unwrap(), end, max_gap, MAX_DEPTH, &mut |s, z| {
            times.push(t0 + (t1 - t0) * s * s);
            points.push(z);
        })?;
        if points[start..].iter().any(|z| z.norm() >= radius) {
            break;
        }
    }
    for (i, z) in points.iter_mut().enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            unresolved.push(i);
            *z = C::new(f64::NAN, f64::NAN);
        }
    }
    Ok(TraceSample { times, points, unresolved, eps_lift })
}

/// Emits points on `(a, b]` in order, bisecting while neighbours are more
/// than `gap` apart.
#[allow(clippy::too_many_arguments)]
fn refine<F, E>(f: &F, a: f64, b: f64, za: C, zb: C, gap: f64, depth: u32, emit: &mut E) -> Result<()>
where
    F: Fn(f64) -> Result<C>,
    E: FnMut(f64, C),
{
    if depth > 0 && !((zb - za).norm() <= gap) {
        let m = 0.5 * (a + b);
        let zm = f(m)?;
        refine(f, a, m, za, zm, gap, depth - 1, emit)?;
        refine(f, m, b, zm, zb, gap, depth - 1, emit)?;
    } else {
        emit(b, zb);
    }
    Ok(())
}
