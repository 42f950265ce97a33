use spikamp::free_probability::SpectrumModel;
use spikamp::random_matrix::*;

#[test]
fn haar_matrices_are_orthogonal() {
    let mut rng = rng_from_seed(3);
    let q = sample_haar_orthogonal(60, &mut rng).unwrap();
    let g = q.transpose() * &q;
    for i in 0..60 {
        for j in 0..60 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - e).abs() < 1e-12);
        }
    }
}

#[test]
fn haar_first_entry_is_unbiased() {
    // E{Q_11} = 0 and E{Q_11^2} = 1/n under the Haar measure.
    let n = 8;
    let trials = 4000;
    let (mut s, mut s2) = (0.0, 0.0);
    for t in 0..trials {
        let q = sample_haar_orthogonal(n, &mut rng_from_seed(derive_seed(17, t))).unwrap();
        s += q[(0, 0)];
        s2 += q[(0, 0)] * q[(0, 0)];
    }
    let mean = s / trials as f64;
    let second = s2 / trials as f64;
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((second - 1.0 / n as f64).abs() < 0.01, "{second}");
}

#[test]
fn rademacher_signal_is_balanced() {
    let mut total = 0.0;
    for t in 0..100 {
        let mut rng = rng_from_seed(derive_seed(5, t));
        let u = sample_signal(SignalPrior { family: Prior::Rademacher, dimension: 1000 }, &mut rng).unwrap();
        assert!(u.iter().all(|&x| x == 1.0 || x == -1.0));
        total += u.iter().sum::<f64>() / 1000.0;
    }
    assert!((total / 100.0).abs() < 0.1);
}

#[test]
fn sphere_signal_has_exact_norm() {
    let mut rng = rng_from_seed(9);
    let v = sample_signal(SignalPrior { family: Prior::GaussianSphere, dimension: 500 }, &mut rng).unwrap();
    let n2: f64 = v.iter().map(|x| x * x).sum();
    assert!((n2 - 500.0).abs() < 1e-9);
}

#[test]
fn derived_seeds_are_distinct_and_stable() {
    let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    assert_ne!(derive_seed(42, 7), derive_seed(43, 7));
}

#[test]
fn square_instance_is_symmetric_with_the_sampled_spectrum() {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let inst = build_square_instance(80, 3.0, &mp, Prior::Rademacher, 1).unwrap();
    for i in 0..80 {
        for j in 0..80 {
            assert_eq!(inst.x[(i, j)], inst.x[(j, i)]);
        }
    }
    // tr(X) = sum(lambda) + alpha ||u||^2 / n
    let tr: f64 = (0..80).map(|i| inst.x[(i, i)]).sum();
    let lam: f64 = inst.noise_spectrum.as_ref().unwrap().iter().sum();
    assert!((tr - lam - 3.0).abs() < 1e-9);
}

#[test]
fn rectangular_instance_has_the_sampled_singular_values() {
    let uss = SpectrumModel::uniform_squared_singular(0.5).unwrap();
    let inst = build_rect_instance(30, 60, 0.0, &uss, Prior::Rademacher, Prior::GaussianSphere, 4).unwrap();
    // alpha = 0: X X^T has eigenvalues lambda_i^2, so its trace is sum lambda^2
    let xxt = &inst.x * inst.x.transpose();
    let tr: f64 = (0..30).map(|i| xxt[(i, i)]).sum();
    let lam2: f64 = inst.noise_spectrum.as_ref().unwrap().iter().map(|l| l * l).sum();
    assert!((tr - lam2).abs() < 1e-9);
    assert!(build_rect_instance(60, 30, 1.0, &uss, Prior::Rademacher, Prior::Rademacher, 4).is_err());
}

#[test]
fn instances_are_reproducible() {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let a = build_square_instance(50, 2.0, &mp, Prior::Rademacher, 77).unwrap();
    let b = build_square_instance(50, 2.0, &mp, Prior::Rademacher, 77).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.u_star, b.u_star);
    let c = build_square_instance(50, 2.0, &mp, Prior::Rademacher, 78).unwrap();
    assert_ne!(a.x, c.x);
}

#[test]
fn wishart_noise_has_marcenko_pastur_mean() {
    let inst = build_wishart_instance(300, 2.0, 0.0, Prior::Rademacher, 2).unwrap();
    let tr: f64 = (0..300).map(|i| inst.x[(i, i)]).sum::<f64>() / 300.0;
    assert!((tr - 2.0).abs() < 0.05, "{tr}");
    assert!(inst.noise_spectrum.is_none());
}

#[test]
fn dump_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let uss = SpectrumModel::uniform_squared_singular(0.5).unwrap();
    let inst = build_rect_instance(6, 12, 1.5, &uss, Prior::Rademacher, Prior::GaussianSphere, 8).unwrap();
    let p = dir.path().join("inst.txt");
    dump_instance(&inst, &p).unwrap();
    let back = load_instance(&p).unwrap();
    assert_eq!(back.x, inst.x);
    assert_eq!(back.u_star, inst.u_star);
    assert_eq!(back.v_star, inst.v_star);
    assert_eq!(back.kind, inst.kind);
    assert_eq!(back.noise_spectrum, inst.noise_spectrum);
}
