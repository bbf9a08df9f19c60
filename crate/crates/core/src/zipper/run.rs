use std::sync::Arc;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{AtomicMeasure, GmcSpec};
use crate::error::{Error, Result};
use crate::field::{probe_admissible, probe_moments, q_of, CovarianceModel, GaussianSampler, Probe, ProbeSet, Regime};
use crate::loewner::{hull_trace_to_exit, sample_sle_driving, DrivingPath, MapChain, PlaneMap, Zip};
use crate::natural::quantum::adaptive_cells;
use crate::natural::{minkowski_content, Window};
use crate::seed::{self, seed_for};
use crate::stats::{self, LinearFit};

/// Share of boundary cells that may be lost near the hull before a
/// replicate is dropped.
pub const NEAR_HULL_LIMIT: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipperConfig {
    pub kappa: f64,
    /// Step of the driving function.
    pub dt: f64,
    /// Capacity available to the driving sample; the curve is followed
    /// until it leaves `|z| < window` or this runs out.
    pub horizon: f64,
    /// Exit radius of the curve, below 1 so that every probe stays in the
    /// unit half-disk where the wedge field is defined.
    pub window: f64,
    /// Ball about the root left out of both measures.
    pub exclusion: f64,
    /// Scale of the Minkowski content used as the reference curve measure.
    pub eps_content: f64,
    /// Probe radius of the curve chaos; content atoms are merged into
    /// pieces at least twice this apart.
    pub eps_curve: f64,
    /// Largest curve distance between neighbouring boundary cells.
    pub curve_gap: f64,
    /// Positive quantum-time checkpoints for the linear fit.
    pub checkpoints: usize,
    pub max_gap: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ZipperConfig {
    pub fn new(kappa: f64, replicates: usize, seed: u64) -> Self {
        Self {
            kappa,
            dt: 1e-4,
            horizon: 1.0,
            window: 0.8,
            exclusion: 0.05,
            eps_content: 2f64.powi(-6),
            eps_curve: 0.01,
            curve_gap: 0.02,
            checkpoints: 4,
            max_gap: 5e-3,
            replicates,
            seed,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.kappa.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 4.0) {
            return Err(Error::UnsupportedParameter(format!("kappa = {} outside (0, 4)", self.kappa)));
        }
        if !(self.window > 0.0 && self.window < 1.0) {
            return Err(Error::Precondition(format!("window {} must lie inside the unit half-disk", self.window)));
        }
        if self.checkpoints < 1 || self.replicates < 1 {
            return Err(Error::Precondition("need at least one checkpoint and one replicate".into()));
        }
        if !(self.eps_curve > 0.0 && self.eps_content > 0.0 && self.curve_gap > 0.0 && self.max_gap > 0.0) {
            return Err(Error::Precondition("scales must be positive".into()));
        }
        Ok(())
    }
}

/// One atom of a chaos clock: curve time, the deterministic part of its
/// weight and its field pairing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockAtom {
    pub time: f64,
    /// `σ · ε^{γ̃² n / 2}` before the field factor.
    pub base: f64,
    pub value: f64,
    /// Mean of the pairing, which carries the coordinate change.
    pub mean: f64,
}

/// Multiplies the field by `scale` on atoms after capacity `after`. Pairing
/// means hold the coordinate change and are left alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub after: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipperRun {
    pub replicate: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub trace_seed: u64,
    pub field_seed: u64,
    pub path: DrivingPath,
    /// Capacity time at which the curve left the window; zero when flagged.
    pub exit_time: f64,
    /// Curve chaos of the content measure under the wedge field.
    pub curve: Vec<ClockAtom>,
    /// Boundary chaos of the unzipped right side, timed by landing.
    pub boundary: Vec<ClockAtom>,
    /// `(capacity, quantum time, boundary length)` from the origin on.
    pub clock: Vec<(f64, f64, f64)>,
    pub fit: Option<LinearFit>,
    pub boundary_cells: usize,
    pub near_hull: usize,
    pub dropped_curve: usize,
    pub flagged: Option<String>,
}

impl ZipperRun {
    fn weight(a: &ClockAtom, gt: f64, inj: Option<Injection>) -> f64 {
        let v = match inj {
            Some(i) if a.time > i.after => a.mean + i.scale * (a.value - a.mean),
            _ => a.value,
        };
        a.base * (gt * v).exp()
    }

    /// Quantum time and boundary length of `η[0, c]` at each cut `c`.
    pub fn masses_at(&self, cuts: &[f64], injection: Option<Injection>) -> Vec<(f64, f64)> {
        let gt = 0.5 * self.gamma;
        let up_to = |atoms: &[ClockAtom], c: f64| -> f64 {
            atoms.iter().filter(|a| a.time <= c).map(|a| Self::weight(a, gt, injection)).sum()
        };
        cuts.iter().map(|&c| (up_to(&self.curve, c), up_to(&self.boundary, c))).collect()
    }

    /// Quantum time of the whole run.
    pub fn quantum_time(&self, injection: Option<Injection>) -> f64 {
        let gt = 0.5 * self.gamma;
        self.curve.iter().map(|a| Self::weight(a, gt, injection)).sum()
    }

    /// Capacity time at which the quantum clock first reaches `q`.
    pub fn capacity_at(&self, q: f64, injection: Option<Injection>) -> f64 {
        let gt = 0.5 * self.gamma;
        let mut acc = 0.0;
        for a in &self.curve {
            acc += Self::weight(a, gt, injection);
            if acc >= q {
                return a.time;
            }
        }
        self.exit_time
    }

    /// Clock samples `(capacity, t, m)` at quantum times `q_k`.
    pub fn clock_at(&self, q: &[f64], injection: Option<Injection>) -> Vec<(f64, f64, f64)> {
        let cuts: Vec<f64> = q.iter().map(|&v| self.capacity_at(v, injection)).collect();
        self.masses_at(&cuts, injection).into_iter().zip(&cuts).map(|((t, m), &c)| (c, t, m)).collect()
    }

    /// The same run with the constant `c` added to the field. Every chaos
    /// mass is multiplied by `e^{γ c / 2}`.
    pub fn with_constant(&self, c: f64) -> ZipperRun {
        let shift = |atoms: &[ClockAtom]| -> Vec<ClockAtom> {
            atoms.iter().map(|a| ClockAtom { value: a.value + c, mean: a.mean + c, ..*a }).collect()
        };
        ZipperRun { curve: shift(&self.curve), boundary: shift(&self.boundary), ..self.clone() }
    }

    pub fn is_dropped(&self) -> bool {
        self.flagged.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub replicates: usize,
    pub dropped: usize,
    pub drop_reasons: Vec<(usize, String)>,
    pub r2: Vec<f64>,
    pub slopes: Vec<f64>,
    pub median_r2: f64,
    pub slope_cv: f64,
}

/// Merges consecutive content atoms into pieces whose ends are at least
/// `2 eps` apart; each piece sits at its middle atom and carries the time
/// of its last one.
fn merge_atoms(m: &AtomicMeasure, eps: f64) -> Vec<(C, f64, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut mass = 0.0;
    for (k, a) in m.atoms.iter().enumerate() {
        mass += a.weight;
        let last = k + 1 == m.atoms.len();
        if (a.position - m.atoms[start].position).norm() >= 2.0 * eps || last {
            let mid = m.atoms[(start + k) / 2].position;
            out.push((mid, mass, a.time));
            start = k + 1;
            mass = 0.0;
        }
    }
    out
}

fn flagged(replicate: usize, kappa: f64, trace_seed: u64, field_seed: u64, path: DrivingPath, why: String) -> ZipperRun {
    let gamma = kappa.sqrt();
    ZipperRun {
        replicate,
        kappa,
        gamma,
        alpha: gamma - 2.0 / gamma,
        trace_seed,
        field_seed,
        path,
        exit_time: 0.0,
        curve: Vec::new(),
        boundary: Vec::new(),
        clock: Vec::new(),
        fit: None,
        boundary_cells: 0,
        near_hull: 0,
        dropped_curve: 0,
        flagged: Some(why),
    }
}

/// One replicate: an SLE_κ curve until it leaves the window and an
/// independent `(γ - 2/γ)`-wedge field.
pub fn zipper_replicate(config: &ZipperConfig, replicate: usize) -> Result<ZipperRun> {
    config.validate()?;
    let trace_seed = seed_for(config.seed, 2 * replicate as u64);
    let field_seed = seed_for(config.seed, 2 * replicate as u64 + 1);
    let path = sample_sle_driving(config.kappa, config.dt, config.horizon, trace_seed)?;
    match build_run(config, replicate, trace_seed, field_seed, &path) {
        Ok(run) => Ok(run),
        Err(e @ (Error::UnsupportedParameter(_) | Error::Precondition(_) | Error::Subcritical(_))) => Err(e),
        Err(e) => Ok(flagged(replicate, config.kappa, trace_seed, field_seed, path, e.to_string())),
    }
}

fn build_run(config: &ZipperConfig, replicate: usize, trace_seed: u64, field_seed: u64, path: &DrivingPath) -> Result<ZipperRun> {
    let (kappa, gamma) = (config.kappa, config.gamma());
    let alpha = gamma - 2.0 / gamma;
    let gt = 0.5 * gamma;
    let d = 1.0 + kappa / 8.0;
    let model = CovarianceModel::wedge(alpha, gamma)?;
    let chain = Arc::new(MapChain::from_driving(path)?);
    let trace = hull_trace_to_exit(&chain, config.window, config.max_gap, 1e-6)?;
    let last = trace.points.last().copied().unwrap_or_default();
    if !(last.norm() >= config.window) {
        return Err(Error::Resolution(format!("curve stayed inside |z| < {} up to the horizon", config.window)));
    }
    // The exit piece is kept only up to the window.
    let exit_time = *trace.times.last().unwrap();

    // Curve chaos of the content measure.
    let window = Window { radius: config.window, exclusion: config.exclusion };
    let content = minkowski_content(&trace, d, &[config.eps_content], window, &[])?;
    let curve_spec = GmcSpec::new(gt, Regime::Bulk, vec![config.eps_curve]);
    curve_spec.validate(d)?;
    let mut probes = Vec::new();
    let mut curve = Vec::new();
    let mut dropped_curve = 0;
    for (z, mass, time) in merge_atoms(&content.measure, config.eps_curve) {
        if z.im <= config.eps_curve || z.norm() + config.eps_curve >= 1.0 {
            dropped_curve += 1;
            continue;
        }
        probes.push(Probe::bulk(z, config.eps_curve));
        curve.push(ClockAtom { time, base: mass * curve_spec.log_renorm(config.eps_curve).exp(), value: 0.0, mean: 0.0 });
    }

    // Boundary chaos of the unzipped right side at the exit time.
    let right = chain.right_end(0.0, exit_time)?;
    let zip: Arc<dyn PlaneMap> = Arc::new(Zip { chain: chain.clone(), t: exit_time, s: 0.0 });
    let (cells, skipped, _) = adaptive_cells(zip.as_ref(), right, config.curve_gap);
    let bspec = GmcSpec::new(gt, Regime::Boundary, vec![]);
    let landed: Vec<Option<(f64, f64, f64, Probe)>> = cells
        .par_iter()
        .map(|&(x, dx, eps)| {
            let e = zip.eval(C::new(x, 0.0)).ok()?;
            let tau = e.landed?;
            let probe = Probe::boundary(x, eps).pulled_back(zip.clone());
            if e.value.norm() < config.exclusion {
                return Some((tau, f64::NAN, eps, probe));
            }
            probe_admissible(&model, &probe).ok()?;
            Some((tau, dx, eps, probe))
        })
        .collect();
    let boundary_cells = cells.len() + skipped.len();
    let mut near_hull = skipped.len();
    let mut boundary = Vec::new();
    for item in landed {
        match item {
            None => near_hull += 1,
            Some((_, dx, _, _)) if dx.is_nan() => {}
            Some((tau, dx, eps, probe)) => {
                probes.push(probe);
                boundary.push(ClockAtom { time: tau, base: dx * bspec.log_renorm(eps).exp(), value: 0.0, mean: 0.0 });
            }
        }
    }
    if near_hull as f64 > NEAR_HULL_LIMIT * boundary_cells as f64 {
        return Err(Error::Domain(format!("{near_hull} of {boundary_cells} boundary cells lost near the hull")));
    }
    if curve.is_empty() || boundary.is_empty() {
        return Err(Error::Domain("no admissible atoms".into()));
    }

    // One joint draw of every pairing.
    let (cov, mean) = probe_moments(&model, &ProbeSet::new(probes).with_offset(q_of(gamma)))?;
    let sampler = GaussianSampler::new(&cov, mean.clone())?;
    let mut values = vec![0.0; mean.len()];
    let mut scratch = vec![0.0; mean.len()];
    sampler.sample_into(&mut seed::rng(field_seed), &mut values, &mut scratch);
    let nc = curve.len();
    for (k, a) in curve.iter_mut().chain(boundary.iter_mut()).enumerate() {
        a.value = values[k];
        a.mean = mean[k];
    }
    curve.sort_by(|a, b| a.time.total_cmp(&b.time));
    boundary.sort_by(|a, b| a.time.total_cmp(&b.time));
    debug_assert_eq!(nc + boundary.len(), values.len());

    let mut run = ZipperRun {
        replicate,
        kappa,
        gamma,
        alpha,
        trace_seed,
        field_seed,
        path: path.clone(),
        exit_time,
        curve,
        boundary,
        clock: Vec::new(),
        fit: None,
        boundary_cells,
        near_hull,
        dropped_curve,
        flagged: None,
    };
    let total = run.quantum_time(None);
    let n = config.checkpoints;
    let q: Vec<f64> = (0..=n).map(|k| total * k as f64 / n as f64).collect();
    run.clock = run.clock_at(&q, None);
    // The origin is a clock sample: nothing has been grown yet.
    run.clock[0] = (0.0, 0.0, 0.0);
    let (t, m): (Vec<f64>, Vec<f64>) = run.clock.iter().map(|&(_, t, m)| (t, m)).unzip();
    run.fit = Some(stats::linear_fit(&t, &m));
    Ok(run)
}

/// Replicates in parallel, reported in replicate order, with the linear
/// fit of boundary length against quantum time.
pub fn run_zipper(config: &ZipperConfig) -> Result<(Vec<ZipperRun>, SlopeReport)> {
    config.validate()?;
    let runs: Vec<ZipperRun> =
        (0..config.replicates).into_par_iter().map(|r| zipper_replicate(config, r)).collect::<Result<_>>()?;
    Ok((runs.clone(), slope_report(&runs)))
}

pub fn slope_report(runs: &[ZipperRun]) -> SlopeReport {
    let kept: Vec<&ZipperRun> = runs.iter().filter(|r| !r.is_dropped()).collect();
    let r2: Vec<f64> = kept.iter().filter_map(|r| r.fit.map(|f| f.r2)).collect();
    let slopes: Vec<f64> = kept.iter().filter_map(|r| r.fit.map(|f| f.slope)).collect();
    SlopeReport {
        replicates: runs.len(),
        dropped: runs.len() - kept.len(),
        drop_reasons: runs.iter().filter_map(|r| r.flagged.clone().map(|w| (r.replicate, w))).collect(),
        median_r2: stats::median(&r2),
        slope_cv: if slopes.len() >= 2 { stats::cv(&slopes) } else { f64::NAN },
        r2,
        slopes,
    }
}

/// Per-replicate clocks as CSV with columns `replicate,t,m`.
pub fn write_clocks<W: std::io::Write>(runs: &[ZipperRun], mut w: W) -> Result<()> {
    writeln!(w, "replicate,t,m")?;
    for r in runs.iter().filter(|r| !r.is_dropped()) {
        for &(_, t, m) in &r.clock {
            writeln!(w, "{},{t},{m}", r.replicate)?;
        }
    }
    Ok(())
}
