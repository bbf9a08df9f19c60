use std::io::Write;

use rayon::prelude::*;
use serde_json::json;
use slelab::loewner::{compute_trace, sample_sle_driving, TraceSample, EPS_LIFT};
use slelab::seed::seed_for;

use super::{Outcome, RunError};
use crate::config::ExperimentConfig;
use crate::output::Output;

/// Driving paths and their traces on the sampling grid.
pub fn run(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let kappa = p.kappa.unwrap_or(0.0);
    let horizon = p.horizon.unwrap_or(1.0);
    let dt = p.dt.unwrap_or(1e-3);
    let eps_lift = p.eps_lift.unwrap_or(EPS_LIFT);
    let seeds: Vec<u64> = (0..config.replicates as u64).map(|r| seed_for(config.seed, r)).collect();
    let traces: Vec<TraceSample> = seeds
        .par_iter()
        .map(|&s| -> Result<TraceSample, RunError> {
            let path = sample_sle_driving(kappa, dt, horizon, s)?;
            let times: Vec<f64> = path.times().collect();
            Ok(compute_trace(&path, &times, eps_lift)?)
        })
        .collect::<Result<_, _>>()?;

    let mut flagged = Vec::new();
    for (r, (tr, s)) in traces.iter().zip(&seeds).enumerate() {
        let head = json!({
            "kappa": kappa, "dt": dt, "horizon": horizon, "eps_lift": eps_lift,
            "replicate": r, "seed": s, "unresolved": tr.unresolved.len(),
        });
        out.csv(&format!("trace_{r:04}"), head, |w| tr.write_csv(w).map_err(|e| std::io::Error::other(e.to_string())))?;
        if !tr.unresolved.is_empty() {
            flagged.push((r, format!("{} unresolved trace points", tr.unresolved.len())));
        }
    }
    let rows = traces.iter().enumerate().flat_map(|(r, tr)| {
        tr.resolved().map(move |(t, z)| vec![r as f64, t, z.re, z.im])
    });
    out.plot("trace", &["replicate", "t", "re", "im"], rows)?;
    let tips: Vec<[f64; 2]> = traces
        .iter()
        .map(|tr| tr.points.last().map_or([f64::NAN; 2], |z| [z.re, z.im]))
        .collect();
    out.csv("tips", json!({ "kappa": kappa, "horizon": horizon }), |w| {
        writeln!(w, "replicate,re,im")?;
        for (r, z) in tips.iter().enumerate() {
            writeln!(w, "{r},{},{}", z[0], z[1])?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        seeds: json!(seeds),
        replicates: config.replicates,
        flagged,
        summary: json!({ "kappa": kappa, "horizon": horizon, "tips": tips }),
    })
}
