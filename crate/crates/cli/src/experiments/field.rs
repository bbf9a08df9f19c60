use std::io::Write;

use rayon::prelude::*;
use serde_json::json;
use slelab::chaos::{expected_mass, gmc_total_masses, moment_estimate, probe_at, AtomicMeasure, GmcSpec, MIN_REPLICATES};
use slelab::field::{probe_moments, GaussianSampler, ProbeSet, Regime};
use slelab::seed::seed_for;
use slelab::{stats, Complex64 as C};

use super::{field_model, regime, Outcome, RunError};
use crate::config::ExperimentConfig;
use crate::output::Output;

fn name(regime: Regime) -> &'static str {
    match regime {
        Regime::Bulk => "bulk",
        Regime::Boundary => "boundary",
    }
}

/// Joint samples of probe averages against the exact moments.
pub fn probes(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let regime = regime(config, Regime::Bulk);
    let model = field_model(config, regime);
    let eps = p.eps.unwrap_or(0.01);
    let points = p.points.clone().unwrap_or_else(|| vec![[0.0, 1.0], [0.5, 0.5], [-0.5, 1.5]]);
    let set = ProbeSet::new(points.iter().map(|q| probe_at(regime, C::new(q[0], q[1]), eps)).collect());
    let (cov, mean) = probe_moments(&model, &set)?;
    let sampler = GaussianSampler::new(&cov, mean.clone())?;
    let seeds: Vec<u64> = (0..config.replicates as u64).map(|r| seed_for(config.seed, r)).collect();
    let samples: Vec<Vec<f64>> = seeds.par_iter().map(|&s| sampler.sample(s).values).collect();

    let n = points.len();
    let column = |j: usize| -> Vec<f64> { samples.iter().map(|v| v[j]).collect() };
    let head = json!({ "regime": name(regime), "field": p.field, "eps": eps, "repaired": sampler.repaired });
    out.csv("samples", head.clone(), |w| {
        let names: Vec<String> = (0..n).map(|j| format!("p{j}")).collect();
        writeln!(w, "replicate,{}", names.join(","))?;
        for (r, v) in samples.iter().enumerate() {
            let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{r},{}", cells.join(","))?;
        }
        Ok(())
    })?;
    let mut rows = Vec::new();
    out.csv("moments", head.clone(), |w| {
        writeln!(w, "probe,re,im,eps,mean,variance,sample_mean,sample_variance")?;
        for j in 0..n {
            let x = column(j);
            let (m, v) = (stats::mean(&x), if x.len() > 1 { stats::variance(&x) } else { f64::NAN });
            writeln!(w, "{j},{},{},{eps},{},{},{m},{v}", points[j][0], points[j][1], mean[j], cov[(j, j)])?;
            rows.push(vec![j as f64, cov[(j, j)], v]);
        }
        Ok(())
    })?;
    out.csv("covariance", head, |w| {
        writeln!(w, "i,j,covariance")?;
        for i in 0..n {
            for j in 0..n {
                writeln!(w, "{i},{j},{}", cov[(i, j)])?;
            }
        }
        Ok(())
    })?;
    out.plot("variance", &["probe", "variance", "sample_variance"], rows)?;
    Ok(Outcome {
        seeds: json!(seeds),
        replicates: config.replicates,
        flagged: Vec::new(),
        summary: json!({ "probes": n, "variance": (0..n).map(|j| cov[(j, j)]).collect::<Vec<_>>() }),
    })
}

/// Total chaos mass of a Lebesgue reference measure: Monte Carlo against
/// the exact expectation, and moment diagnostics.
pub fn gmc(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &config.params;
    let regime = regime(config, Regime::Boundary);
    let model = field_model(config, regime);
    let gamma_tilde = p.gamma_tilde.unwrap_or(0.5);
    let eps = p.eps.unwrap_or(0.01);
    let reference = match regime {
        Regime::Boundary => {
            let [a, b] = p.interval.unwrap_or([1.0, 2.0]);
            AtomicMeasure::lebesgue(a, b, p.spacing.unwrap_or(0.02))?
        }
        Regime::Bulk => {
            let [a, b] = p.interval.unwrap_or([-0.5, 0.5]);
            let [c, d] = p.height.unwrap_or([0.5, 1.5]);
            AtomicMeasure::area((a, b), (c, d), p.spacing.unwrap_or(0.1))?
        }
    };
    let spec = GmcSpec::new(gamma_tilde, regime, vec![eps]);
    let n = config.replicates;
    let masses = gmc_total_masses(&model, &reference, &spec, eps, n, config.seed)?;
    let expected = expected_mass(&model, &reference, &spec)?;
    let flagged: Vec<(usize, String)> =
        masses.iter().enumerate().filter(|(_, m)| !m.is_finite()).map(|(r, _)| (r, "non-finite mass".to_string())).collect();
    let finite: Vec<f64> = masses.iter().copied().filter(|m| m.is_finite()).collect();
    let mean = stats::mean(&finite);
    let se = if finite.len() > 1 { stats::std_error(&finite) } else { f64::NAN };
    let z = (mean - expected) / se;

    let head = json!({
        "regime": name(regime), "field": p.field, "gamma_tilde": gamma_tilde, "eps": eps,
        "atoms": reference.len(), "reference_mass": reference.total_mass(),
    });
    out.csv("masses", head.clone(), |w| {
        writeln!(w, "replicate,mass")?;
        for (r, m) in masses.iter().enumerate() {
            writeln!(w, "{r},{m}")?;
        }
        Ok(())
    })?;
    out.csv("summary", head.clone(), |w| {
        writeln!(w, "expected,mean,se,z")?;
        writeln!(w, "{expected},{mean},{se},{z}")
    })?;
    let orders = p.orders.clone().unwrap_or_else(|| vec![1.5, 3.0]);
    let mut moments = Vec::new();
    if finite.len() >= 2 * MIN_REPLICATES {
        for &q in &orders {
            let full = moment_estimate(&finite, q)?;
            let half = moment_estimate(&finite[..finite.len() / 2], q)?;
            moments.push(json!({
                "order": q, "estimate": full.estimate, "half_estimate": half.estimate,
                "change": (full.estimate / half.estimate - 1.0).abs(),
                "tail_index": full.tail_index, "heavy_tail": full.heavy_tail,
            }));
        }
    }
    out.csv("moments", head, |w| {
        writeln!(w, "order,estimate,half_estimate,change,tail_index,heavy_tail")?;
        for m in &moments {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                m["order"], m["estimate"], m["half_estimate"], m["change"], m["tail_index"], m["heavy_tail"]
            )?;
        }
        Ok(())
    })?;
    out.plot("masses", &["replicate", "mass"], masses.iter().enumerate().map(|(r, m)| vec![r as f64, *m]))?;
    let seeds: Vec<u64> = (0..n as u64).map(|r| seed_for(config.seed, r)).collect();
    Ok(Outcome {
        seeds: json!(seeds),
        replicates: n,
        flagged,
        summary: json!({ "expected": expected, "mean": mean, "se": se, "z": z, "moments": moments }),
    })
}
