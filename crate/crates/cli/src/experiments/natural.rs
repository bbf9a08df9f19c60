use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;
use slelab::loewner::{hull_trace, hull_trace_to_exit, sample_sle_driving, MapChain};
use slelab::natural::{
    compare_segment_masses, dimension_fit, equal_segments, expected_quantum_time, mask_times, minkowski_content, segment_masses,
    ContentEstimate, Layout, QuantumTimeConfig, Window,
};
use slelab::seed::seed_for;

use super::{dyadic, window, Outcome, RunError};
use crate::config::{ExperimentConfig, WindowSpec};
use crate::output::Output;

/// Lift used for traces that feed neighbourhood areas.
const FINE_LIFT: f64 = 1e-6;

fn flag_or_fail<T>(r: usize, res: Result<T, slelab::Error>, flagged: &mut Vec<(usize, String)>) -> Result<Option<T>, RunError> {
    match res {
        Ok(v) => Ok(Some(v)),
        Err(e) => match RunError::from(e.clone()) {
            RunError::Numerical(_) => {
                flagged.push((r, e.to_string()));
                Ok(None)
            }
            other => Err(other),
        },
    }
}

/// Neighbourhood areas of SLE traces until they leave the window, and the
/// pooled dimension fit.
pub fn minkowski(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let kappa = p.kappa.unwrap_or(2.0);
    let d = 1.0 + kappa / 8.0;
    let dt = p.dt.unwrap_or(1e-5);
    let horizon = p.horizon.unwrap_or(1.0);
    let schedule = p.schedule.clone().unwrap_or_else(|| dyadic(4, 7));
    let max_gap = p.max_gap.unwrap_or(2e-3);
    let eps_lift = p.eps_lift.unwrap_or(FINE_LIFT);
    let w = window(config, WindowSpec { radius: 1.0, exclusion: 0.0 });
    let seeds: Vec<u64> = (0..config.replicates as u64).map(|r| seed_for(config.seed, r)).collect();
    let results: Vec<Result<ContentEstimate, slelab::Error>> = seeds
        .par_iter()
        .map(|&s| {
            let path = sample_sle_driving(kappa, dt, horizon, s)?;
            let chain = MapChain::from_driving(&path)?;
            let trace = hull_trace_to_exit(&chain, w.radius, max_gap, eps_lift)?;
            minkowski_content(&trace, d, &schedule, Window { radius: w.radius, exclusion: w.exclusion }, &[])
        })
        .collect();
    let mut flagged = Vec::new();
    let mut kept = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        if let Some(est) = flag_or_fail(r, res, &mut flagged)? {
            kept.push((r, est));
        }
    }
    let head = json!({ "kappa": kappa, "d": d, "dt": dt, "horizon": horizon, "window": w, "max_gap": max_gap });
    out.csv("areas", head.clone(), |o| {
        writeln!(o, "replicate,eps,area,content")?;
        for (r, est) in &kept {
            for (k, e) in est.eps.iter().enumerate() {
                writeln!(o, "{r},{e},{},{}", est.area[k].iter().sum::<f64>(), est.total[k])?;
            }
        }
        Ok(())
    })?;
    out.csv("fits", head.clone(), |o| {
        writeln!(o, "replicate,slope,intercept,r2")?;
        for (r, est) in &kept {
            if let Some(f) = &est.fit {
                writeln!(o, "{r},{},{},{}", f.slope, f.intercept, f.r2)?;
            }
        }
        Ok(())
    })?;
    let ests: Vec<ContentEstimate> = kept.iter().map(|(_, e)| e.clone()).collect();
    let pooled = dimension_fit(&ests);
    let summary = json!({
        "traces": kept.len(),
        "slope": pooled.as_ref().map(|f| f.slope),
        "intercept": pooled.as_ref().map(|f| f.intercept),
        "r2": pooled.as_ref().map(|f| f.r2),
        "expected_slope": 2.0 - d,
        "dimension": pooled.as_ref().map(|f| 2.0 - f.slope),
    });
    out.json("dimension", &summary)?;
    let rows = kept.iter().flat_map(|(r, est)| {
        est.eps.iter().zip(&est.area).map(move |(e, a)| vec![e.ln(), a.iter().sum::<f64>().ln(), *r as f64])
    });
    out.plot("areas", &["log_eps", "log_area", "replicate"], rows)?;
    Ok(Outcome { seeds: json!(seeds), replicates: config.replicates, flagged, summary })
}

struct TraceComparison {
    trace_seed: u64,
    field_seed: u64,
    content: Vec<f64>,
    masked: Vec<f64>,
    quantum: Vec<f64>,
    quantum_se: Vec<f64>,
    exact: Vec<f64>,
    cv: f64,
    noise_cv: Option<f64>,
    exact_cv: f64,
    mean_ratio: f64,
    unresolved_span: f64,
    content_csv: Vec<u8>,
    quantum_csv: Vec<u8>,
}

/// Expected quantum time against Minkowski content, segment by segment, on
/// a few traces.
pub fn natural_param(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let kappa = p.kappa.unwrap_or(2.0);
    let gamma = kappa.sqrt();
    let d = 1.0 + kappa / 8.0;
    let dt = p.dt.unwrap_or(1e-5);
    let t = p.t.unwrap_or(0.5);
    let traces = p.traces.unwrap_or(1);
    let nseg = p.segments.unwrap_or(8);
    let schedule = p.schedule.clone().unwrap_or_else(|| dyadic(4, 7));
    let curve_gap = p.curve_gap.unwrap_or(0.005);
    let max_gap = p.max_gap.unwrap_or(2e-3);
    let eps_lift = p.eps_lift.unwrap_or(FINE_LIFT);
    let w = window(config, WindowSpec { radius: f64::INFINITY, exclusion: 0.05 });
    let segs = equal_segments(0.0, t, nseg);
    let replicates = config.replicates;

    let one = |k: usize| -> Result<TraceComparison, slelab::Error> {
        let trace_seed = seed_for(config.seed, 2 * k as u64);
        let field_seed = seed_for(config.seed, 2 * k as u64 + 1);
        let path = sample_sle_driving(kappa, dt, t, trace_seed)?;
        let chain = Arc::new(MapChain::from_driving(&path)?);
        let trace = hull_trace(&chain, t, max_gap, eps_lift)?;
        let content = minkowski_content(&trace, d, &schedule, Window { radius: w.radius, exclusion: w.exclusion }, &segs)?;
        let qconfig = QuantumTimeConfig::new(Layout::Adaptive { curve_gap }, replicates, field_seed)
            .with_segments(segs.clone())
            .with_exclusion(w.exclusion);
        let qt = expected_quantum_time(chain, t, gamma, &qconfig)?;
        let masked = segment_masses(&mask_times(&content.measure, &qt.unresolved), &segs);
        let cmp = compare_segment_masses(&qt.segment_mean, &masked, Some(&qt.segment_se))?;
        let exact = segment_masses(&qt.measure.with_weights(&qt.exact), &segs);
        let exact_cmp = compare_segment_masses(&exact, &masked, None)?;
        let extra = json!({ "kappa": kappa, "trace_seed": trace_seed, "field_seed": field_seed });
        let (mut content_csv, mut quantum_csv) = (Vec::new(), Vec::new());
        content.write_csv(&mut content_csv, &extra)?;
        qt.write_csv(&mut quantum_csv, &extra)?;
        Ok(TraceComparison {
            trace_seed,
            field_seed,
            content: content.content.clone(),
            masked,
            quantum: qt.segment_mean.clone(),
            quantum_se: qt.segment_se.clone(),
            exact,
            cv: cmp.cv,
            noise_cv: cmp.noise_cv,
            exact_cv: exact_cmp.cv,
            mean_ratio: cmp.mean,
            unresolved_span: qt.unresolved_span,
            content_csv,
            quantum_csv,
        })
    };
    let results: Vec<_> = (0..traces).into_par_iter().map(one).collect();
    let mut flagged = Vec::new();
    let mut kept = Vec::new();
    for (k, res) in results.into_iter().enumerate() {
        if let Some(c) = flag_or_fail(k, res, &mut flagged)? {
            kept.push((k, c));
        }
    }

    let head = json!({
        "kappa": kappa, "gamma": gamma, "d": d, "dt": dt, "t": t, "segments": nseg,
        "schedule": schedule, "curve_gap": curve_gap, "window": w, "field_replicates": replicates,
    });
    for (k, c) in &kept {
        restamp(out, &format!("content_{k:03}"), &c.content_csv)?;
        restamp(out, &format!("quantum_{k:03}"), &c.quantum_csv)?;
    }
    out.csv("segments", head.clone(), |o| {
        writeln!(o, "trace,segment,t0,t1,content,masked_content,quantum,quantum_se,exact,ratio")?;
        for (k, c) in &kept {
            for (j, &(a, b)) in segs.iter().enumerate() {
                let ratio = c.quantum[j] / c.masked[j];
                writeln!(
                    o,
                    "{k},{j},{a},{b},{},{},{},{},{},{ratio}",
                    c.content[j], c.masked[j], c.quantum[j], c.quantum_se[j], c.exact[j]
                )?;
            }
        }
        Ok(())
    })?;
    out.csv("comparison", head, |o| {
        writeln!(o, "trace,trace_seed,field_seed,cv,noise_cv,exact_cv,mean_ratio,unresolved_span")?;
        for (k, c) in &kept {
            writeln!(
                o,
                "{k},{},{},{},{},{},{},{}",
                c.trace_seed,
                c.field_seed,
                c.cv,
                c.noise_cv.unwrap_or(f64::NAN),
                c.exact_cv,
                c.mean_ratio,
                c.unresolved_span
            )?;
        }
        Ok(())
    })?;
    let rows = kept
        .iter()
        .flat_map(|(k, c)| (0..nseg).map(move |j| vec![*k as f64, j as f64, c.quantum[j] / c.masked[j]]));
    out.plot("ratios", &["trace", "segment", "ratio"], rows)?;
    let cvs: Vec<f64> = kept.iter().map(|(_, c)| c.cv).collect();
    let seeds: Vec<_> = (0..traces as u64)
        .map(|k| json!({ "trace": seed_for(config.seed, 2 * k), "field": seed_for(config.seed, 2 * k + 1) }))
        .collect();
    Ok(Outcome {
        seeds: json!(seeds),
        replicates: traces,
        flagged,
        summary: json!({ "cv": cvs, "threshold": slelab::natural::PROPORTIONAL_CV }),
    })
}

/// Rewrites a CSV produced by the core library, whose first line is a `#`
/// JSON header, with the manifest hash merged into that header.
fn restamp(out: &mut Output, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let cut = bytes.iter().position(|b| *b == b'\n').map_or(bytes.len(), |i| i + 1);
    let (first, rest) = bytes.split_at(cut);
    let head = first.strip_prefix(b"# ").and_then(|h| serde_json::from_slice(h).ok()).unwrap_or_default();
    out.csv(name, head, |o| o.write_all(rest))
}
