//! Compositions of slit maps with partial-piece time handling.
//!
//! All maps here act in absolute coordinates: `forward(z, s, t)` is
//! `g_t ∘ g_s^{-1}` and `inverse(w, s, t)` its inverse. The centred maps
//! `φ_s^t = g_t ∘ g_s^{-1}(· + W_s) - W_t` are built on top.
//!
//! Inverse composition dominates every downstream stage, so full pieces are
//! grouped into aligned blocks whose inverse is stored as a Laurent series
//! about the centre of the block's hull image. A block is evaluated through
//! its series when the point is well outside that image and through its
//! children otherwise.

use std::f64::consts::PI;

use num_complex::Complex64 as C;

use super::driving::DrivingPath;
use super::slit::Slit;
use crate::error::{Error, Result};

const BASE_BLOCK: usize = 32;
const BRANCH: usize = 8;
const TERMS: usize = 36;
const SAMPLES: usize = 128;
const SAMPLE_RADIUS: f64 = 1.6;
const FAR: f64 = 2.5;

/// Result of pushing one point through part of a chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapEval {
    pub value: C,
    /// Complex derivative of the composed map at the input point.
    pub deriv: C,
    /// For a real input of an inverse map: capacity time at which the point
    /// lands on the hull.
    pub landed: Option<f64>,
    /// Smallest distance to a slit seen during a forward map, in the
    /// coordinates of that slit. Infinite for inverse maps.
    pub hull_distance: f64,
}

#[derive(Clone, Debug)]
struct Block {
    centre: f64,
    radius: f64,
    /// `b_j = a_j / ρ^j` with `ρ` the sample radius.
    coef: Vec<f64>,
    rho: f64,
}

impl Block {
    #[inline]
    fn is_far(&self, w: C) -> bool {
        let u = w - self.centre;
        u.norm_sqr() > (FAR * self.radius).powi(2)
    }

    #[inline]
    fn apply(&self, w: C, d: C) -> (C, C) {
        let u = w - self.centre;
        let z = self.rho / u;
        let mut s = C::new(0.0, 0.0);
        let mut ds = C::new(0.0, 0.0);
        for (j, &b) in self.coef.iter().enumerate().rev() {
            ds = ds * z + b * (j + 1) as f64;
            s = s * z + b;
        }
        let s = s * z;
        // d/dw Σ b_j z^j = Σ j b_j z^{j-1} · (-z²/ρ)
        let fprime = C::new(1.0, 0.0) - ds * z * z / self.rho;
        (w + s, d * fprime)
    }
}

#[derive(Clone, Debug)]
struct Level {
    size: usize,
    blocks: Vec<Block>,
}

/// A Loewner chain of vertical-slit pieces.
#[derive(Clone, Debug)]
pub struct MapChain {
    steps: Vec<Slit>,
    times: Vec<f64>,
    /// Hull image interval after `k` pieces; `(+inf, -inf)` when empty.
    ends: Vec<(f64, f64)>,
    levels: Vec<Level>,
}

/// A time span decomposed into a partial head, whole pieces and a partial
/// tail.
struct Span {
    head: Option<(Slit, f64)>,
    full: std::ops::Range<usize>,
    tail: Option<(Slit, f64)>,
}

impl MapChain {
    pub fn from_driving(path: &DrivingPath) -> Result<Self> {
        let steps = path.values[..path.steps()]
            .iter()
            .map(|&w| Slit::new(w, path.dt))
            .collect();
        Self::from_steps(steps)
    }

    pub fn from_steps(steps: Vec<Slit>) -> Result<Self> {
        Self::build(steps, true)
    }

    /// Same chain without the series acceleration; used as a reference.
    pub fn from_steps_unaccelerated(steps: Vec<Slit>) -> Result<Self> {
        Self::build(steps, false)
    }

    fn build(steps: Vec<Slit>, accelerate: bool) -> Result<Self> {
        if steps.iter().any(|s| !(s.cap >= 0.0) || !s.cap.is_finite() || !s.drive.is_finite()) {
            return Err(Error::InvalidGrid("pieces need finite drives and durations >= 0".into()));
        }
        let mut times = Vec::with_capacity(steps.len() + 1);
        let mut ends = Vec::with_capacity(steps.len() + 1);
        let mut t = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        times.push(t);
        ends.push((lo, hi));
        for s in &steps {
            t += s.cap;
            times.push(t);
            (lo, hi) = s.grow_interval(lo, hi);
            ends.push((lo, hi));
        }
        let mut chain = Self { steps, times, ends, levels: Vec::new() };
        if accelerate {
            chain.build_levels();
        }
        Ok(chain)
    }

    fn build_levels(&mut self) {
        let n = self.steps.len();
        let mut size = BASE_BLOCK;
        while size <= n {
            let count = n / size;
            let blocks = (0..count).map(|b| self.make_block(b * size, (b + 1) * size)).collect();
            self.levels.push(Level { size, blocks });
            size *= BRANCH;
        }
    }

    fn make_block(&self, k0: usize, k1: usize) -> Block {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.steps[k0..k1] {
            (lo, hi) = s.grow_interval(lo, hi);
        }
        let centre = 0.5 * (lo + hi);
        let radius = (0.5 * (hi - lo)).max(1e-300);
        let rho = SAMPLE_RADIUS * radius;
        let half = SAMPLES / 2;
        let mut resid = vec![C::new(0.0, 0.0); SAMPLES];
        let mut unit = vec![C::new(0.0, 0.0); SAMPLES];
        for m in 0..=half {
            let e = C::from_polar(1.0, 2.0 * PI * m as f64 / SAMPLES as f64);
            let mut w = centre + rho * e;
            if m == 0 || m == half {
                w.im = 0.0;
            }
            let (f, _, _) = self.inverse_full(w, C::new(1.0, 0.0), k0, k1, false);
            unit[m] = e;
            resid[m] = f - w;
            if m != 0 && m != half {
                unit[SAMPLES - m] = e.conj();
                resid[SAMPLES - m] = resid[m].conj();
            }
        }
        let coef = (1..=TERMS)
            .map(|j| {
                let acc: C = resid.iter().zip(&unit).map(|(r, e)| r * e.powi(j as i32)).sum();
                acc.re / SAMPLES as f64
            })
            .collect();
        Block { centre, radius, coef, rho }
    }

    /// Inverse of pieces `lo..hi` applied from the top down. When `track` is
    /// set and the input is real, reports the landing time.
    fn inverse_full(&self, mut w: C, mut d: C, lo: usize, hi: usize, track: bool) -> (C, C, Option<f64>) {
        let mut k = hi;
        'outer: while k > lo {
            for lev in self.levels.iter().rev() {
                let sz = lev.size;
                if k % sz == 0 && k - sz >= lo {
                    let b = &lev.blocks[k / sz - 1];
                    if b.is_far(w) {
                        (w, d) = b.apply(w, d);
                        k -= sz;
                        continue 'outer;
                    }
                }
            }
            let s = &self.steps[k - 1];
            let was_real = w.im == 0.0;
            let (nw, nd) = s.inverse(w);
            w = nw;
            d *= nd;
            k -= 1;
            if track && was_real && w.im > 0.0 {
                let landed = self.times[k] + 0.25 * w.im * w.im;
                let (w2, d2, _) = self.inverse_full(w, d, lo, k, false);
                return (w2, d2, Some(landed));
            }
        }
        (w, d, None)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Slit] {
        &self.steps
    }

    /// Total capacity time.
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Piece boundaries `t_0 = 0 < … < t_N`.
    pub fn boundaries(&self) -> &[f64] {
        &self.times
    }

    /// Snap `t` onto a piece boundary when rounding put it a hair away.
    fn snap(&self, t: f64) -> Result<(usize, f64)> {
        let tol = 1e-9 * self.steps.first().map_or(1.0, |s| s.cap.max(1e-300));
        let h = self.horizon();
        if !(t >= -tol && t <= h + tol) || !t.is_finite() {
            return Err(Error::TimeOutOfRange(t));
        }
        let t = t.clamp(0.0, h);
        // first boundary index with times[a] >= t
        let a = self.times.partition_point(|&x| x < t);
        if a < self.times.len() && (self.times[a] - t).abs() <= tol {
            return Ok((a, self.times[a]));
        }
        if a > 0 && (t - self.times[a - 1]).abs() <= tol {
            return Ok((a - 1, self.times[a - 1]));
        }
        Ok((a, t))
    }

    fn span(&self, s: f64, t: f64) -> Result<Span> {
        let (a, s) = self.snap(s)?;
        let (bi, t) = self.snap(t)?;
        if t < s {
            return Err(Error::Precondition(format!("span from {s} to {t} runs backwards")));
        }
        // a: first boundary >= s; b: last boundary <= t.
        let b = if bi < self.times.len() && self.times[bi] <= t { bi } else { bi - 1 };
        if a > b {
            // both ends inside piece b
            let cap = t - s;
            let head = (cap > 0.0).then(|| (Slit::new(self.steps[b].drive, cap), s));
            return Ok(Span { head, full: 0..0, tail: None });
        }
        let head = (self.times[a] > s).then(|| (Slit::new(self.steps[a - 1].drive, self.times[a] - s), s));
        let tail = (t > self.times[b]).then(|| (Slit::new(self.steps[b].drive, t - self.times[b]), self.times[b]));
        Ok(Span { head, full: a..b, tail })
    }

    /// Driving value in force at time `t`: the drive of the piece containing
    /// `t`, with pieces closed on the right and `W(0)` the first drive.
    pub fn drive_at(&self, t: f64) -> Result<f64> {
        if self.steps.is_empty() {
            return if t == 0.0 { Ok(0.0) } else { Err(Error::TimeOutOfRange(t)) };
        }
        let (a, _) = self.snap(t)?;
        // t on a boundary t_a or inside (t_{a-1}, t_a): either way piece a-1.
        Ok(self.steps[a.max(1) - 1].drive)
    }

    /// `g_t ∘ g_s^{-1}(z)` with derivative.
    pub fn forward(&self, z: C, s: f64, t: f64) -> Result<MapEval> {
        if z.im < 0.0 {
            return Err(Error::Domain(format!("{z} is below the real axis")));
        }
        let span = self.span(s, t)?;
        let mut w = z;
        let mut d = C::new(1.0, 0.0);
        let mut dist = f64::INFINITY;
        let mut push = |slit: &Slit, w: &mut C, d: &mut C| -> Result<()> {
            let gap = slit.distance(*w);
            if w.im > 0.0 && gap <= 1e-12 * slit.height().max(1e-300) {
                return Err(Error::PointInHull(format!("{z}")));
            }
            dist = dist.min(gap);
            let (nw, nd) = slit.forward(*w);
            *w = nw;
            *d *= nd;
            Ok(())
        };
        if let Some((slit, _)) = &span.head {
            push(slit, &mut w, &mut d)?;
        }
        for k in span.full.clone() {
            push(&self.steps[k], &mut w, &mut d)?;
        }
        if let Some((slit, _)) = &span.tail {
            push(slit, &mut w, &mut d)?;
        }
        Ok(MapEval { value: w, deriv: d, landed: None, hull_distance: dist })
    }

    /// `g_s ∘ g_t^{-1}(w)` with derivative and landing time for real input.
    pub fn inverse(&self, w: C, s: f64, t: f64) -> Result<MapEval> {
        if w.im < 0.0 {
            return Err(Error::Domain(format!("{w} is below the real axis")));
        }
        let span = self.span(s, t)?;
        let mut w = w;
        let mut d = C::new(1.0, 0.0);
        let mut landed = None;
        let step = |slit: &Slit, start: f64, w: &mut C, d: &mut C, landed: &mut Option<f64>| {
            let was_real = w.im == 0.0;
            let (nw, nd) = slit.inverse(*w);
            *w = nw;
            *d *= nd;
            if was_real && w.im > 0.0 && landed.is_none() {
                *landed = Some(start + 0.25 * w.im * w.im);
            }
        };
        if let Some((slit, start)) = &span.tail {
            step(slit, *start, &mut w, &mut d, &mut landed);
        }
        if !span.full.is_empty() {
            let track = landed.is_none() && w.im == 0.0;
            let (nw, nd, l) = self.inverse_full(w, d, span.full.start, span.full.end, track);
            w = nw;
            d = nd;
            if landed.is_none() {
                landed = l;
            }
        }
        if let Some((slit, start)) = &span.head {
            step(slit, *start, &mut w, &mut d, &mut landed);
        }
        Ok(MapEval { value: w, deriv: d, landed, hull_distance: f64::INFINITY })
    }

    /// `φ_s^t(z) = g_t ∘ g_s^{-1}(z + W_s) - W_t`.
    pub fn unzip(&self, z: C, s: f64, t: f64) -> Result<MapEval> {
        let ws = self.drive_at(s)?;
        let wt = self.drive_at(t)?;
        let mut e = self.forward(z + ws, s, t)?;
        e.value -= wt;
        Ok(e)
    }

    /// `φ_t^s(w) = g_s ∘ g_t^{-1}(w + W_t) - W_s`, the inverse of [`Self::unzip`].
    pub fn zip(&self, w: C, t: f64, s: f64) -> Result<MapEval> {
        let ws = self.drive_at(s)?;
        let wt = self.drive_at(t)?;
        let mut e = self.inverse(w + wt, s, t)?;
        e.value -= ws;
        Ok(e)
    }

    /// Image interval of the hull grown over `(s, t]`, in absolute
    /// coordinates at time `t`. `None` when nothing has grown.
    pub fn hull_interval(&self, s: f64, t: f64) -> Result<Option<(f64, f64)>> {
        let span = self.span(s, t)?;
        let (mut lo, mut hi) = if span.full.start == 0 && span.head.is_none() {
            self.ends[span.full.end]
        } else {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            if let Some((slit, _)) = &span.head {
                (lo, hi) = slit.grow_interval(lo, hi);
            }
            for k in span.full.clone() {
                (lo, hi) = self.steps[k].grow_interval(lo, hi);
            }
            (lo, hi)
        };
        if let Some((slit, _)) = &span.tail {
            (lo, hi) = slit.grow_interval(lo, hi);
        }
        Ok((lo <= hi).then_some((lo, hi)))
    }

    /// `φ_s^t(0+)`: right end of the image of the hull grown over `(s, t]`,
    /// centred at the driving value at `t`.
    pub fn right_end(&self, s: f64, t: f64) -> Result<f64> {
        let wt = self.drive_at(t)?;
        Ok(self.hull_interval(s, t)?.map_or(0.0, |(_, hi)| hi - wt))
    }

    /// The chain of pieces after time `s`, drives shifted by `-W_s`, so that
    /// its maps are `φ_s^{s+u}`.
    pub fn tail_from(&self, s: f64) -> Result<MapChain> {
        let ws = self.drive_at(s)?;
        let span = self.span(s, self.horizon())?;
        let mut steps = Vec::with_capacity(span.full.len() + 2);
        if let Some((slit, _)) = span.head {
            steps.push(slit);
        }
        steps.extend_from_slice(&self.steps[span.full.clone()]);
        if let Some((slit, _)) = span.tail {
            steps.push(slit);
        }
        for st in &mut steps {
            st.drive -= ws;
        }
        Self::build(steps, !self.levels.is_empty())
    }

    /// The chain truncated at time `t`.
    pub fn head_until(&self, t: f64) -> Result<MapChain> {
        let span = self.span(0.0, t)?;
        let mut steps = self.steps[span.full.clone()].to_vec();
        if let Some((slit, _)) = span.head.or(span.tail) {
            steps.push(slit);
        }
        Self::build(steps, !self.levels.is_empty())
    }

    /// Conjugation by `z ↦ λz`: drives scale by `λ`, durations by `λ²`.
    pub fn dilated(&self, lambda: f64) -> Result<MapChain> {
        let steps = self.steps.iter().map(|s| Slit::new(s.drive * lambda, s.cap * lambda * lambda)).collect();
        Self::build(steps, !self.levels.is_empty())
    }

    /// Largest `|W|` over the pieces.
    pub fn max_abs_drive(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.drive.abs()))
    }
}
