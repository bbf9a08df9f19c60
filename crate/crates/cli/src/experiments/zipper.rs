use std::io::Write;

use serde_json::json;
use slelab::seed::seed_for;
use slelab::zipper::{
    markov_covariance_check, run_zipper, stationarity_diagnostic, write_clocks, MarkovConfig, ZipperConfig, CHECKPOINTS, DELTA,
    MIN_RUNS,
};

use super::{Outcome, RunError};
use crate::config::ExperimentConfig;
use crate::output::Output;

/// Quantum-zipper runs: boundary length against quantum time per
/// replicate, and stationarity of their ratio across checkpoints.
pub fn zipper(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let mut zc = ZipperConfig::new(p.kappa.unwrap_or(2.0), config.replicates, config.seed);
    if let Some(v) = p.dt {
        zc.dt = v;
    }
    if let Some(v) = p.horizon {
        zc.horizon = v;
    }
    if let Some(w) = config.window {
        zc.window = w.radius;
        zc.exclusion = w.exclusion;
    }
    if let Some(v) = p.eps {
        zc.eps_content = v;
    }
    if let Some(v) = p.curve_gap {
        zc.curve_gap = v;
    }
    if let Some(v) = p.checkpoints {
        zc.checkpoints = v;
    }
    if let Some(v) = p.max_gap {
        zc.max_gap = v;
    }
    let checkpoints = p.stationarity.clone().unwrap_or_else(|| CHECKPOINTS.to_vec());
    let delta = p.delta.unwrap_or(DELTA);
    let (runs, report) = run_zipper(&zc)?;

    let slope = json!({
        "median_R2": report.median_r2,
        "slope_cv": report.slope_cv,
        "dropped": report.dropped,
        "replicates": report.replicates,
        "drop_reasons": report.drop_reasons,
        "r2": report.r2,
        "slopes": report.slopes,
        "config": zc,
    });
    out.json("slope_report", &slope)?;
    out.csv("clocks", json!({ "kappa": zc.kappa, "checkpoints": zc.checkpoints }), |w| {
        write_clocks(&runs, w).map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    let kept = runs.len() - report.dropped;
    let stationarity = if kept >= 2 {
        let st = stationarity_diagnostic(&runs, &checkpoints, delta)?;
        json!({
            "checkpoints": st.checkpoints,
            "delta": st.delta,
            "runs_used": st.runs_used,
            "min_runs": MIN_RUNS,
            "power_warning": st.power_warning,
            "level": st.level,
            "rejected": st.rejected,
            "pairs": st.pairs,
        })
    } else {
        json!({ "runs_used": kept, "power_warning": true, "rejected": null })
    };
    out.json("stationarity", &stationarity)?;
    let rows = runs
        .iter()
        .filter(|r| !r.is_dropped())
        .flat_map(|r| r.clock.iter().map(move |&(_, t, m)| vec![r.replicate as f64, t, m]));
    out.plot("clocks", &["replicate", "t", "m"], rows)?;
    let seeds: Vec<_> = runs.iter().map(|r| json!({ "trace": r.trace_seed, "field": r.field_seed })).collect();
    Ok(Outcome {
        seeds: json!(seeds),
        replicates: runs.len(),
        flagged: report.drop_reasons.clone(),
        summary: json!({
            "median_R2": report.median_r2,
            "slope_cv": report.slope_cv,
            "dropped": report.dropped,
            "stationarity_rejected": stationarity["rejected"],
        }),
    })
}

/// Both sides of the Markov covariance identity, segment by segment.
pub fn markov(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let kappa = p.kappa.unwrap_or(2.0);
    let s = p.s.unwrap_or(0.25);
    let t = p.t.unwrap_or(0.5);
    let mut mc = MarkovConfig::new(config.replicates, config.seed);
    if let Some(v) = p.dt {
        mc.dt = v;
    }
    if let Some(v) = p.segments {
        mc.segments = v;
    }
    if let Some(v) = p.curve_gap {
        mc.curve_gap = v;
    }
    if let Some(w) = config.window {
        mc.exclusion = w.exclusion;
    }
    let r = markov_covariance_check(kappa, s, t, &mc)?;
    let head = json!({ "kappa": kappa, "s": s, "t": t, "config": mc, "atoms": r.atoms, "pass": r.pass });
    out.csv("markov", head, |w| {
        writeln!(w, "segment,t0,t1,lhs,lhs_se,rhs,rhs_se,lhs_exact,rhs_exact,z")?;
        for (j, &(a, b)) in r.segments.iter().enumerate() {
            writeln!(
                w,
                "{j},{a},{b},{},{},{},{},{},{},{}",
                r.lhs[j], r.lhs_se[j], r.rhs[j], r.rhs_se[j], r.lhs_exact[j], r.rhs_exact[j], r.z[j]
            )?;
        }
        Ok(())
    })?;
    out.json("markov", &serde_json::to_value(&r).map_err(|e| RunError::Io(e.to_string()))?)?;
    let rows = (0..r.segments.len()).map(|j| vec![j as f64, r.segments[j].0, r.segments[j].1, r.lhs[j], r.rhs[j], r.lhs_se[j], r.rhs_se[j]]);
    out.plot("markov", &["segment", "t0", "t1", "lhs", "rhs", "lhs_se", "rhs_se"], rows)?;
    Ok(Outcome {
        seeds: json!({ "trace": mc.trace_seed, "lhs_field": seed_for(mc.seed, 0), "rhs_field": seed_for(mc.seed, 1) }),
        replicates: config.replicates,
        flagged: Vec::new(),
        summary: json!({ "z": r.z, "pass": r.pass }),
    })
}
