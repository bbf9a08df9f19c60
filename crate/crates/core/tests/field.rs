use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64 as C;
use slelab::field::*;
use slelab::loewner::{sample_sle_driving, Compose, DrivingPath, MapChain, PlaneMap, Unzip, Zip};
use slelab::seed::seed_for;
use slelab::Error;

fn i(y: f64) -> C {
    C::new(0.0, y)
}

/// Polar Gauss quadrature of `f` against the uniform density of a disk.
fn disk_average(rho: &DiskRho, f: impl Fn(C) -> f64, n: usize) -> f64 {
    let (x, w) = slelab::quad::gauss_legendre(n);
    let mut s = 0.0;
    for (xr, wr) in x.iter().zip(&w) {
        let r = rho.radius * 0.5 * (xr + 1.0);
        for k in 0..4 * n {
            let th = TAU * (k as f64 + 0.5) / (4 * n) as f64;
            s += wr * 0.5 * rho.radius * r * (TAU / (4 * n) as f64) * f(rho.centre + C::from_polar(r, th));
        }
    }
    s / (PI * rho.radius * rho.radius)
}

#[test]
fn dirichlet_and_green_values() {
    let m = CovarianceModel::dirichlet();
    assert!((m.kernel(i(1.0), i(2.0)).unwrap() - 3f64.ln()).abs() < 1e-14);
    assert!((green_neumann(C::new(1.0, 0.0), C::new(3.0, 0.0)) + 2.0 * 2f64.ln()).abs() < 1e-14);
    assert_eq!(m.kernel(i(1.0), i(1.0)), Err(Error::DiagonalSingularity));
}

#[test]
fn neumann_kernel_matches_quadrature_oracle() {
    let rho = DiskRho::standard(0.0);
    let m = CovarianceModel::neumann(rho);
    // Φ(u) = ∫ρ G(·, u) with the log singularity handled by refinement.
    let phi = |u: C, n: usize| disk_average(&rho, |x| green_neumann(x, u), n);
    // Inner and outer rules differ so no node meets itself.
    let c4 = disk_average(&rho, |x| phi(x, 61), 40);
    for (z, w) in [(i(1.0), i(2.0)), (C::new(0.5, 0.3), C::new(-1.0, 0.2)), (C::new(2.0, 0.0), C::new(0.1, 1.5))] {
        let oracle = green_neumann(z, w) - phi(z, 256) - phi(w, 256) + c4;
        let k = m.kernel(z, w).unwrap();
        assert!((k - oracle).abs() < 1e-3, "{z} {w}: {k} vs {oracle}");
    }
    // (h, ρ) = 0 normalisation.
    let avg = disk_average(&rho, |x| if (x - i(0.3)).norm() > 0.0 { m.kernel(x, i(0.3)).unwrap() } else { 0.0 }, 48);
    assert!(avg.abs() < 1e-3, "{avg}");
}

#[test]
fn single_dirichlet_probe_variance() {
    let m = CovarianceModel::dirichlet();
    let cov = probe_covariance(&m, &ProbeSet::new(vec![Probe::bulk(i(1.0), 0.01)])).unwrap();
    let expect = -(0.01f64).ln() + 2f64.ln();
    assert!((cov[(0, 0)] - expect).abs() < 1e-3 && (expect - 5.29832).abs() < 1e-5);
}

/// Offset-trapezoid double quadrature of a kernel over two circles.
fn brute_circle_pair(m: &CovarianceModel, a: (C, f64), b: (C, f64), n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        let u = a.0 + C::from_polar(a.1, TAU * p as f64 / n as f64);
        for q in 0..n {
            let v = b.0 + C::from_polar(b.1, TAU * (q as f64 + 0.5) / n as f64);
            s += m.kernel(u, v).unwrap();
        }
    }
    s / (n * n) as f64
}

#[test]
fn closed_forms_match_brute_force() {
    let m = CovarianceModel::dirichlet();
    let pairs = [((i(1.0), 0.1), (i(1.0), 0.1)), ((i(1.0), 0.1), (C::new(0.15, 1.0), 0.1)), ((i(1.0), 0.3), (C::new(0.05, 1.05), 0.1))];
    for (a, b) in pairs {
        let cov = probe_covariance(&m, &ProbeSet::new(vec![Probe::bulk(a.0, a.1), Probe::bulk(b.0, b.1)])).unwrap();
        let brute = brute_circle_pair(&m, a, b, 3000);
        assert!((cov[(0, 1)] - brute).abs() < 2e-3, "{a:?} {b:?}: {} vs {brute}", cov[(0, 1)]);
    }
    let n = CovarianceModel::neumann(DiskRho::standard(0.0));
    let a = (C::new(0.3, 0.5), 0.2);
    let b = (C::new(0.5, 0.6), 0.15);
    let cov = probe_covariance(&n, &ProbeSet::new(vec![Probe::bulk(a.0, a.1), Probe::bulk(b.0, b.1)])).unwrap();
    let brute = brute_circle_pair(&n, a, b, 3000);
    assert!((cov[(0, 1)] - brute).abs() < 2e-3, "{} vs {brute}", cov[(0, 1)]);
}

#[test]
fn far_probes_reduce_to_the_kernel() {
    let m = CovarianceModel::dirichlet();
    let (z1, z2) = (C::new(-1.0, 1.0), C::new(2.0, 1.5));
    let cov = probe_covariance(&m, &ProbeSet::new(vec![Probe::bulk(z1, 1e-3), Probe::bulk(z2, 1e-3)])).unwrap();
    assert!((cov[(0, 1)] - m.kernel(z1, z2).unwrap()).abs() < 1e-3);
    assert_eq!(probe_covariance(&m, &ProbeSet::default()).unwrap().nrows(), 0);
}

#[test]
fn boundary_neumann_variance_is_exact() {
    let rho = DiskRho::standard(0.0);
    let m = CovarianceModel::neumann(rho);
    let k = khat(&m, C::new(0.7, 0.0), Regime::Boundary, &KHAT_SCHEDULE).unwrap();
    let expect = 4.0 * (C::new(0.7, 0.0) - rho.centre).norm().ln() + rho.energy();
    assert!((k.value - expect).abs() < 1e-9, "{} {expect}", k.value);
}

#[test]
fn khat_dirichlet_examples() {
    let m = CovarianceModel::dirichlet();
    let a = khat(&m, i(1.0), Regime::Bulk, &KHAT_SCHEDULE).unwrap();
    let b = khat(&m, i(2.0), Regime::Bulk, &KHAT_SCHEDULE).unwrap();
    assert!((a.value - 2f64.ln()).abs() < 1e-2 && (b.value - 4f64.ln()).abs() < 1e-2);
    assert!(a.converged && b.converged);
    // brute-force double quadrature of the probe variance at ε = 0.01
    let brute = brute_circle_pair(&m, (i(1.0), 0.01), (i(1.0), 0.01), 4000) + 0.01f64.ln();
    assert!((brute - 2f64.ln()).abs() < 1e-3, "{brute}");
}

#[test]
fn sample_variance_and_determinism() {
    let cov = nalgebra::DMatrix::from_element(1, 1, 4.0);
    let sampler = GaussianSampler::new(&cov, vec![0.0]).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|k| sampler.sample(seed_for(3, k)).values[0]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    assert!((var - 4.0).abs() < 3.0 * ((m4 - var * var) / n).sqrt());
    assert_eq!(sample_probes(&cov, &[0.0], 77).unwrap(), sample_probes(&cov, &[0.0], 77).unwrap());
}

#[test]
fn wedge_positive_branch_moments() {
    let (alpha, gamma) = (0.5, 2f64.sqrt());
    let grid = [0.5, 1.0, 2.0];
    let n = 10_000;
    let mut vals = vec![Vec::with_capacity(n); 3];
    for k in 0..n {
        let p = wedge_radial_path(alpha, gamma, &grid, seed_for(8, k as u64)).unwrap();
        for j in 0..3 {
            vals[j].push(p.values[j]);
        }
    }
    for (j, &t) in grid.iter().enumerate() {
        let v = &vals[j];
        let nf = n as f64;
        let mean = v.iter().sum::<f64>() / nf;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        assert!((mean - alpha * t).abs() < 3.0 * (var / nf).sqrt(), "t={t} mean {mean}");
        let se_var = var * (2.0 / (nf - 1.0)).sqrt();
        assert!((var - 2.0 * t).abs() < 3.0 * se_var, "t={t} var {var}");
    }
}

#[test]
fn wedge_negative_branch_is_conditioned() {
    let gamma = 1.5;
    let q = q_of(gamma);
    let grid: Vec<f64> = (1..=50).map(|k| -0.02 * k as f64).collect();
    for s in 0..20 {
        let p = wedge_radial_path(0.3, gamma, &grid, s).unwrap();
        assert!(p.values.iter().zip(&grid).all(|(a, t)| a - q * t > 0.0));
    }
    assert!(matches!(wedge_radial_path(q, gamma, &grid, 0), Err(Error::UnsupportedParameter(_))));
}

#[test]
fn markov_split_examples() {
    let m = CovarianceModel::dirichlet();
    let chain = MapChain::from_driving(&DrivingPath::constant(0.0, 1e-3, 1.0).unwrap()).unwrap();
    let probes = ProbeSet::new(vec![Probe::bulk(i(3.0), 1e-3)]);
    let c = markov_split_covariance(&m, &chain, 1.0, &probes).unwrap();
    assert!((c[(0, 0)] - 1.8f64.ln()).abs() < 2e-2, "{}", c[(0, 0)]);
    let id = markov_split_covariance(&m, &chain, 0.0, &probes).unwrap();
    assert_eq!(id[(0, 0)], 0.0);
    let chain = MapChain::from_driving(&sample_sle_driving(2.0, 1e-3, 0.5, 4).unwrap()).unwrap();
    let probes = ProbeSet::new(
        (0..12).map(|k| Probe::bulk(C::new(-1.5 + 0.25 * k as f64, 1.9 + 0.1 * (k % 3) as f64), 0.05)).collect(),
    );
    let c = markov_split_covariance(&m, &chain, 0.5, &probes).unwrap();
    let min = nalgebra::SymmetricEigen::new(c).eigenvalues.min();
    assert!(min >= -1e-9, "{min}");
    // a probe node on the hull is a domain error
    let bad = ProbeSet::new(vec![Probe::bulk(i(1.0), 0.5)]);
    let chain = MapChain::from_driving(&DrivingPath::constant(0.0, 1e-3, 1.0).unwrap()).unwrap();
    assert!(markov_split_covariance(&m, &chain, 1.0, &bad).is_err());
}

#[test]
fn dirichlet_kernel_vanishes_at_the_boundary() {
    let m = CovarianceModel::dirichlet();
    for x in [-2.0, 0.0, 0.5, 3.0] {
        assert!(m.kernel(C::new(0.2, 1.0), C::new(x, 1e-3)).unwrap().abs() < 1e-2);
    }
}

#[test]
fn radial_neumann_variance_grows_linearly() {
    // The identity is exact while the normalising disk stays clear of the
    // probes; with the disk at i the radius-1 semicircle cuts through it.
    let m = CovarianceModel::neumann(DiskRho::standard(4.0));
    let ts: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
    let vs: Vec<f64> = ts.iter().map(|t| probe_variance(&m, C::new(0.0, 0.0), (-t / 2.0).exp(), Regime::Boundary).unwrap()).collect();
    let n = ts.len() as f64;
    let (mt, mv) = (ts.iter().sum::<f64>() / n, vs.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&vs).map(|(t, v)| (t - mt) * (v - mv)).sum::<f64>() / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn wedge_mean_is_log_drift() {
    let alpha = 0.4;
    let w = CovarianceModel::wedge(alpha, 1.5).unwrap();
    let n = CovarianceModel::neumann(DiskRho::standard(0.0));
    for (c, e, regime) in [(C::new(0.3, 0.4), 0.05, Regime::Bulk), (C::new(0.02, 0.3), 0.1, Regime::Bulk), (C::new(0.2, 0.0), 0.05, Regime::Boundary)] {
        let p = ProbeSet::new(vec![Probe::new(c, e, regime)]);
        let diff = probe_means(&w, &p).unwrap()[0] - probe_means(&n, &p).unwrap()[0];
        let (a, b) = if regime == Regime::Bulk { (0.0, TAU) } else { (0.0, PI) };
        let avg = slelab::quad::adaptive(&|th: f64| (c + C::from_polar(e, th)).norm().ln(), a, b, 1e-13) / (b - a);
        assert!((diff + alpha * avg).abs() < 1e-10, "{diff} {avg}");
    }
    assert!(CovarianceModel::wedge(2.0, 1.0).is_err() == false);
    assert!(matches!(CovarianceModel::wedge(2.6, 1.0), Err(Error::UnsupportedParameter(_))));
}

/// Identity written as a non-trivial composition, forcing the node route.
fn roundabout_identity(seed: u64) -> Arc<dyn PlaneMap> {
    let chain = Arc::new(MapChain::from_driving(&sample_sle_driving(2.0, 1e-3, 0.3, seed).unwrap()).unwrap());
    Arc::new(Compose {
        inner: Arc::new(Unzip { chain: chain.clone(), s: 0.0, t: 0.3 }),
        outer: Arc::new(Zip { chain, t: 0.3, s: 0.0 }),
    })
}

#[test]
fn node_route_reproduces_closed_forms() {
    let id = roundabout_identity(2);
    for model in [CovarianceModel::dirichlet(), CovarianceModel::neumann(DiskRho::standard(0.0)), CovarianceModel::wedge(0.3, 1.2).unwrap()] {
        let plain = vec![Probe::bulk(C::new(0.4, 0.5), 0.02), Probe::bulk(C::new(-0.5, 0.6), 0.05), Probe::boundary(0.8, 0.03)];
        let mapped: Vec<Probe> = plain.iter().cloned().map(|p| p.pulled_back(id.clone())).collect();
        let a = probe_covariance(&model, &ProbeSet::new(plain)).unwrap();
        let b = probe_covariance(&model, &ProbeSet::new(mapped)).unwrap();
        let tol = if model.law == FieldLaw::Dirichlet { 2e-3 } else { 1e-7 };
        for r in 0..3 {
            for c in 0..3 {
                assert!((a[(r, c)] - b[(r, c)]).abs() < tol, "{:?} ({r},{c}): {} vs {}", model.law, a[(r, c)], b[(r, c)]);
            }
        }
    }
}

#[test]
fn pullback_matches_mapped_probes() {
    // h ∘ φ paired with a small circle against h paired with the image
    // circle of radius ε|φ'|. For bulk circles the mean-value property of
    // log|Δφ/Δw| makes the two agree exactly, at every scale.
    let chain = Arc::new(MapChain::from_driving(&sample_sle_driving(2.0, 1e-3, 0.3, 9).unwrap()).unwrap());
    let map: Arc<dyn PlaneMap> = Arc::new(Unzip { chain: chain.clone(), s: 0.0, t: 0.3 });
    let model = CovarianceModel::dirichlet();
    let zs = [C::new(0.3, 0.6), C::new(-0.4, 0.8)];
    let gap = |eps: f64| {
        let pulled: Vec<Probe> = zs.iter().map(|z| Probe::bulk(*z, eps).pulled_back(map.clone())).collect();
        let direct: Vec<Probe> = zs
            .iter()
            .map(|z| {
                let e = map.eval(*z).unwrap();
                Probe::bulk(e.value, eps * e.deriv.norm())
            })
            .collect();
        let a = probe_covariance(&model, &ProbeSet::new(pulled)).unwrap();
        let b = probe_covariance(&model, &ProbeSet::new(direct)).unwrap();
        (a - b).abs().max()
    };
    let (g1, g2) = (gap(0.02), gap(0.01));
    assert!(g1 < 1e-9 && g2 < 1e-9, "{g1} {g2}");
}

#[test]
fn bump_mollifier_shifts_variance_by_a_constant() {
    let m = CovarianceModel::dirichlet().with_mollifier(Mollifier::Bump);
    let a = khat(&m, i(1.0), Regime::Bulk, &KHAT_SCHEDULE).unwrap().value;
    let b = khat(&m, i(2.0), Regime::Bulk, &KHAT_SCHEDULE).unwrap().value;
    assert!((b - a - 2f64.ln()).abs() < 1e-6);
}
