use std::sync::Arc;

use num_complex::Complex64 as C;
use slelab::chaos::*;
use slelab::field::{sample_field, CovarianceModel, DiskRho, Regime};
use slelab::loewner::{DrivingPath, MapChain, PlaneMap, Similarity, Unzip, Zip};
use slelab::{stats, Error};

fn neumann() -> CovarianceModel {
    CovarianceModel::neumann(DiskRho::standard(1.0))
}

fn boundary_spec(g: f64, eps: Vec<f64>) -> GmcSpec {
    GmcSpec::new(g, Regime::Boundary, eps)
}

#[test]
fn zero_gamma_leaves_reference_unchanged() {
    let model = neumann();
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.02).unwrap();
    let probes = probes_for(&reference, Regime::Boundary, 0.01);
    let p = sample_field(&model, &probes, 3).unwrap();
    let out = gmc_measure(&reference, &p, 0.01, &boundary_spec(0.0, vec![0.01])).unwrap();
    assert_eq!(out.weights(), reference.weights());
}

#[test]
fn recover_inverts_construction_at_every_scale() {
    let model = neumann();
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.02).unwrap();
    let spec = boundary_spec(0.3, vec![0.01, 0.005, 0.0025]);
    for &eps in &spec.eps_schedule {
        let p = sample_field(&model, &probes_for(&reference, Regime::Boundary, eps), 11).unwrap();
        let chaos = gmc_measure(&reference, &p, eps, &spec).unwrap();
        let back = recover_reference(&chaos, &p, eps, &spec).unwrap();
        for (a, b) in back.atoms.iter().zip(&reference.atoms) {
            assert!((a.weight - b.weight).abs() <= 1e-12 * b.weight);
        }
    }
}

#[test]
fn mismatched_probes_are_rejected() {
    let model = neumann();
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.02).unwrap();
    let spec = boundary_spec(0.3, vec![0.01]);
    let p = sample_field(&model, &probes_for(&reference, Regime::Boundary, 0.01), 1).unwrap();
    assert!(matches!(gmc_measure(&reference, &p, 0.005, &spec), Err(Error::Alignment(_))));
    let shifted = AtomicMeasure::lebesgue(1.1, 2.1, 0.02).unwrap();
    assert!(matches!(recover_reference(&shifted, &p, 0.01, &spec), Err(Error::Alignment(_))));
}

#[test]
fn subcritical_guard() {
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.02).unwrap();
    let spec = boundary_spec(1.0, vec![0.1, 0.01, 0.001]);
    let r = gmc_converged(&neumann(), &reference, &spec, 0);
    assert!(matches!(r, Err(Error::Subcritical(_))));
    assert!(GmcSpec::new(1.4, Regime::Bulk, vec![0.1]).validate(1.0).is_ok());
    assert!(GmcSpec::new(1.5, Regime::Bulk, vec![0.1]).validate(1.0).is_err());
}

#[test]
fn expected_mass_of_point_mass_at_i() {
    let sigma = AtomicMeasure::new(vec![Atom::new(C::new(0.0, 1.0), 1.0)], 2.0, Support::Curve).unwrap();
    let spec = GmcSpec::new(0.5, Regime::Bulk, vec![0.01]);
    let m = expected_mass(&CovarianceModel::dirichlet(), &sigma, &spec).unwrap();
    assert!((m - 2f64.powf(0.125)).abs() < 1e-9, "{m}");
    assert!((m - 1.09051).abs() < 1e-5);
    let zero = GmcSpec::new(0.0, Regime::Bulk, vec![0.01]);
    assert_eq!(expected_mass(&CovarianceModel::dirichlet(), &sigma, &zero).unwrap(), 1.0);
}

fn check_mean_mass(model: &CovarianceModel, reference: &AtomicMeasure, spec: &GmcSpec, eps: f64, seed: u64) {
    let masses = gmc_total_masses(model, reference, spec, eps, 10_000, seed).unwrap();
    let expect = expected_mass(model, reference, spec).unwrap();
    let (m, se) = (stats::mean(&masses), stats::std_error(&masses));
    assert!((m - expect).abs() <= 3.0 * se, "gamma {}: mean {m} expected {expect} se {se}", spec.gamma_tilde);
}

#[test]
fn boundary_mean_mass_matches_expectation() {
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.02).unwrap();
    for (k, g) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        check_mean_mass(&neumann(), &reference, &boundary_spec(g, vec![0.01]), 0.01, 100 + k as u64);
    }
}

#[test]
fn bulk_mean_mass_matches_expectation() {
    let reference = AtomicMeasure::area((-0.5, 0.5), (0.5, 1.5), 0.1).unwrap();
    for (k, g) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let spec = GmcSpec::new(g, Regime::Bulk, vec![0.02]);
        check_mean_mass(&CovarianceModel::dirichlet(), &reference, &spec, 0.02, 200 + k as u64);
    }
}

#[test]
fn convergence_across_scales() {
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.002).unwrap();
    let zero = gmc_converged(&neumann(), &reference, &boundary_spec(0.0, vec![0.1, 0.01, 0.001]), 5).unwrap();
    assert!(zero.converged);
    assert!(zero.total_mass.iter().all(|m| (m - 1.0).abs() < 1e-12));

    let spec = boundary_spec(0.3, vec![0.1, 0.01, 0.001]);
    let seeds: Vec<u64> = (0..400).collect();
    let reports = gmc_converged_many(&neumann(), &reference, &spec, &seeds).unwrap();
    let change: Vec<f64> = reports.iter().map(|r| (r.total_mass[2] - r.total_mass[1]).abs() / r.total_mass[1]).collect();
    assert!(stats::median(&change) < 0.05, "{change:?}");
    assert!(reports.iter().filter(|r| r.converged).count() * 2 > reports.len());
}

#[test]
fn constant_masses_have_exact_moments() {
    let masses = vec![1.7; 1000];
    let m = moment_estimate(&masses, 2.5).unwrap();
    assert!((m.estimate - 1.7f64.powf(2.5)).abs() < 1e-12);
    assert!(!m.heavy_tail);
    assert!(moment_estimate(&masses[..999], 1.0).is_err());
}

#[test]
fn moments_below_and_above_threshold() {
    let gamma = 2f64.sqrt();
    let spec = boundary_spec(gamma / 2.0, vec![0.01]);
    let model = CovarianceModel::neumann(DiskRho::standard(0.0));
    let reference = AtomicMeasure::lebesgue(-0.5, 0.5, 0.02).unwrap();
    let masses = gmc_total_masses(&model, &reference, &spec, 0.01, 100_000, 77).unwrap();
    let half = moment_estimate(&masses[..50_000], 1.5).unwrap();
    let full = moment_estimate(&masses, 1.5).unwrap();
    assert!((full.estimate / half.estimate - 1.0).abs() < 0.1, "{half:?} {full:?}");
    let third = moment_estimate(&masses, 3.0).unwrap();
    assert!(third.heavy_tail, "{third:?}");
}

#[test]
fn exponent_identities() {
    for g in [1.0, 2f64.sqrt(), 3f64.sqrt()] {
        assert!(boundary_exponent(g).abs() < 1e-14);
        assert!(curve_exponent(g).abs() < 1e-14);
    }
}

#[test]
fn invariance_under_dilation() {
    let gamma = 2f64.sqrt();
    let model = neumann();
    let map: Arc<dyn PlaneMap> = Arc::new(Similarity { lambda: 2.0, shift: 0.0 });
    let inv: Arc<dyn PlaneMap> = Arc::new(Similarity { lambda: 0.5, shift: 0.0 });
    let coarse_ref = AtomicMeasure::lebesgue(1.0, 2.0, 0.02).unwrap();
    let fine_ref = AtomicMeasure::lebesgue(1.0, 2.0, 0.002).unwrap();
    let coarse = invariance_check(map.clone(), inv.clone(), &model, &coarse_ref, gamma, gamma / 2.0, 1e-2, 1).unwrap();
    let fine = invariance_check(map, inv, &model, &fine_ref, gamma, gamma / 2.0, 1e-3, 2).unwrap();
    // Matched scales make both sides the same probe, so the statistic is
    // rounding noise at every scale.
    assert!(fine.median_abs <= coarse.median_abs + 1e-12, "{} {}", coarse.median_abs, fine.median_abs);
    assert!(coarse.median_abs < 0.1 && fine.median_abs < 0.1);
}

#[test]
fn invariance_under_slit_map_improves_with_scale() {
    let gamma = 2f64.sqrt();
    let model = neumann();
    let chain = Arc::new(MapChain::from_driving(&DrivingPath::constant(0.0, 0.01, 0.25).unwrap()).unwrap());
    let map: Arc<dyn PlaneMap> = Arc::new(Unzip { chain: chain.clone(), s: 0.0, t: 0.25 });
    let inv: Arc<dyn PlaneMap> = Arc::new(Zip { chain, t: 0.25, s: 0.0 });
    let reference = AtomicMeasure::lebesgue(1.0, 2.0, 0.05).unwrap();
    let stat = |eps: f64| {
        let r: Vec<f64> = (0..8)
            .map(|s| invariance_check(map.clone(), inv.clone(), &model, &reference, gamma, gamma / 2.0, eps, s).unwrap().median_abs)
            .collect();
        stats::mean(&r)
    };
    let (a, b) = (stat(2e-2), stat(2e-3));
    assert!(b < a && a < 0.1, "{a} {b}");
    let bad = invariance_check(
        Arc::new(Similarity { lambda: 2.0, shift: 0.0 }),
        Arc::new(Similarity { lambda: 0.5, shift: 0.0 }),
        &model,
        &reference,
        gamma,
        0.5,
        1e-2,
        0,
    );
    assert!(matches!(bad, Err(Error::Precondition(_))));
}

#[test]
fn scale_martingale() {
    let fit = martingale_slope(&CovarianceModel::dirichlet(), C::new(0.0, 1.0), Regime::Bulk, 0.3, 0.01, 10_000, 9).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
    let fit = martingale_slope(&neumann(), C::new(1.5, 0.0), Regime::Boundary, 0.3, 0.01, 10_000, 10).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
}
