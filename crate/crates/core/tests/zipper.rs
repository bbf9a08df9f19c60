use std::sync::{Arc, OnceLock};

use slelab::loewner::{sample_sle_driving, MapChain};
use slelab::zipper::*;
use rand::Rng;
use rand_distr::StandardNormal;
use slelab::seed;
use slelab::Error;

fn runs() -> &'static [ZipperRun] {
    static RUNS: OnceLock<Vec<ZipperRun>> = OnceLock::new();
    RUNS.get_or_init(|| run_zipper(&ZipperConfig::new(2.0, 6, 11)).unwrap().0)
}

fn kept() -> impl Iterator<Item = &'static ZipperRun> {
    runs().iter().filter(|r| !r.is_dropped())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn clock_starts_at_zero_and_grows() {
    assert!(kept().count() >= 4);
    for r in kept() {
        assert_eq!(r.clock[0], (0.0, 0.0, 0.0));
        assert_eq!(r.masses_at(&[0.0], None), vec![(0.0, 0.0)]);
        let cuts: Vec<f64> = (0..=50).map(|k| r.exit_time * k as f64 / 50.0).collect();
        let m = r.masses_at(&cuts, None);
        for w in m.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        for w in r.clock.windows(2) {
            assert!(w[1].1 >= w[0].1 && w[1].2 >= w[0].2);
        }
    }
}

#[test]
fn boundary_length_is_additive() {
    for r in kept() {
        let (c1, c2) = (0.3 * r.exit_time, 0.8 * r.exit_time);
        let m = r.masses_at(&[c1, c2], None);
        let gt = 0.5 * r.gamma;
        let inc: f64 =
            r.boundary.iter().filter(|a| a.time > c1 && a.time <= c2).map(|a| a.base * (gt * a.value).exp()).sum();
        assert!(close(m[1].1, m[0].1 + inc, 1e-12), "{} vs {}", m[1].1, m[0].1 + inc);
    }
}

#[test]
fn clock_reads_quantum_time() {
    for r in kept() {
        let total = r.quantum_time(None);
        let gt = 0.5 * r.gamma;
        let n = r.clock.len() - 1;
        for (k, &(c, t, _)) in r.clock.iter().enumerate().skip(1) {
            let q = total * k as f64 / n as f64;
            // The clock stops on the first atom that reaches q.
            let last = r.curve.iter().find(|a| a.time == c).unwrap();
            let w = last.base * (gt * last.value).exp();
            assert!(t >= q * (1.0 - 1e-12) && t - w < q, "q {q} t {t} w {w}");
        }
        assert!(close(r.clock[n].1, total, 1e-12));
    }
}

#[test]
fn wedge_constant_scales_both_masses() {
    let lambda = 3.0;
    for r in kept() {
        let c = 2.0 / r.gamma * f64::ln(lambda);
        let s = r.with_constant(c);
        let cuts = [0.25 * r.exit_time, r.exit_time];
        for (a, b) in r.masses_at(&cuts, None).iter().zip(s.masses_at(&cuts, None)) {
            assert!(close(b.0, lambda * a.0, 1e-12) && close(b.1, lambda * a.1, 1e-12));
        }
        // Rates are ratios of masses and do not move.
        assert!(close(window_rate(r, 0.1, 0.2, None), window_rate(&s, 0.1, 0.2, None), 1e-12));
    }
}

#[test]
fn fit_is_reported_per_replicate() {
    let rep = slope_report(runs());
    assert_eq!(rep.replicates, runs().len());
    assert_eq!(rep.r2.len() + rep.dropped, runs().len());
    assert!(rep.slopes.iter().all(|s| *s > 0.0));
}

#[test]
fn replicates_are_reproducible() {
    let cfg = ZipperConfig::new(2.0, 6, 11);
    let again = zipper_replicate(&cfg, 2).unwrap();
    assert_eq!(again, runs()[2]);
    let json = serde_json::to_string(runs()).unwrap();
    assert_eq!(serde_json::from_str::<Vec<ZipperRun>>(&json).unwrap(), runs());
    let mut csv = Vec::new();
    write_clocks(&runs()[..2], &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("replicate,t,m\n"));
    assert_eq!(text.lines().count(), 1 + runs()[..2].iter().map(|r| r.clock.len()).sum::<usize>());
}

#[test]
fn bad_configs_are_rejected() {
    let mut cfg = ZipperConfig::new(4.5, 2, 1);
    assert!(matches!(run_zipper(&cfg), Err(Error::UnsupportedParameter(_))));
    cfg.kappa = 2.0;
    cfg.window = 1.5;
    assert!(run_zipper(&cfg).is_err());
}

#[test]
fn identical_checkpoints_have_zero_statistic() {
    let rep = stationarity_diagnostic(runs(), &[0.3, 0.3], 0.2).unwrap();
    assert_eq!(rep.pairs.len(), 1);
    assert_eq!(rep.pairs[0].statistic, 0.0);
    assert!(!rep.rejected);
    assert!(rep.power_warning);
    assert!(stationarity_diagnostic(runs(), &[0.3], 0.2).is_err());
    assert!(stationarity_diagnostic(runs(), &[0.3, 0.9], 0.2).is_err());
}

/// Stand-in runs with the structure of real ones: unit-rate clocks, with
/// boundary pairings fluctuating more than curve pairings.
fn synthetic_runs(n: usize) -> Vec<ZipperRun> {
    let template = ZipperRun { path: sample_sle_driving(2.0, 0.1, 0.1, 0).unwrap(), ..runs()[0].clone() };
    (0..n)
        .map(|r| {
            let mut rng = seed::rng(seed::seed_for(99, r as u64));
            let mut atoms = |sd: f64| -> Vec<ClockAtom> {
                (1..=200)
                    .map(|k| {
                        let v: f64 = rng.sample(StandardNormal);
                        ClockAtom { time: k as f64 / 200.0, base: 0.005, value: sd * v, mean: 0.0 }
                    })
                    .collect()
            };
            let curve = atoms(1.0);
            let boundary = atoms(3.0);
            ZipperRun { replicate: r, exit_time: 1.0, curve, boundary, ..template.clone() }
        })
        .collect()
}

#[test]
fn injected_scaling_is_rejected() {
    let runs = synthetic_runs(200);
    let quiet = stationarity_diagnostic(&runs, &CHECKPOINTS, DELTA).unwrap();
    assert!(!quiet.rejected && !quiet.power_warning, "{:?}", quiet.pairs);
    let loud = stationarity_diagnostic_with(&runs, &CHECKPOINTS, DELTA, Some(Injection { after: CHECKPOINTS[1], scale: 1.5 })).unwrap();
    assert!(loud.rejected, "{:?}", loud.pairs);
    assert!(!loud.pairs[2].rejected);
}

fn sle2_chain(horizon: f64, seed: u64) -> Arc<MapChain> {
    let path = sample_sle_driving(2.0, 1e-3, horizon, seed).unwrap();
    Arc::new(MapChain::from_driving(&path).unwrap())
}

#[test]
fn markov_check_is_empty_when_s_equals_t() {
    let cfg = MarkovConfig::new(100, 1);
    let r = markov_covariance_check_on(sle2_chain(0.5, 1), 2.0, 0.5, 0.5, &cfg).unwrap();
    assert!(r.pass);
    assert!(r.lhs.iter().chain(&r.rhs).all(|v| *v == 0.0));
    assert!(markov_covariance_check_on(sle2_chain(0.5, 1), 2.0, 0.3, 0.2, &cfg).is_err());
    assert!(markov_covariance_check_on(sle2_chain(0.5, 1), 4.0, 0.2, 0.3, &cfg).is_err());
}

#[test]
fn markov_check_scales_under_dilation() {
    let kappa = 2.0;
    let chain = sle2_chain(0.5, 2);
    let mut cfg = MarkovConfig::new(50, 3);
    cfg.curve_gap = 0.04;
    let base = markov_covariance_check_on(chain.clone(), kappa, 0.25, 0.5, &cfg).unwrap();
    cfg.curve_gap *= 2.0;
    cfg.exclusion *= 2.0;
    let big = markov_covariance_check_on(Arc::new(chain.dilated(2.0).unwrap()), kappa, 1.0, 2.0, &cfg).unwrap();
    let factor = 2f64.powf(1.0 + kappa / 8.0);
    assert_eq!(base.atoms, big.atoms);
    for j in 0..4 {
        assert!(close(big.lhs_exact[j], factor * base.lhs_exact[j], 1e-6), "{j}: {:?} {:?}", big.lhs_exact, base.lhs_exact);
        assert!(close(big.rhs_exact[j], factor * base.rhs_exact[j], 1e-6), "{j}: {:?} {:?}", big.rhs_exact, base.rhs_exact);
    }
}
