use spikamp::free_probability::{Inverse, Kind, SpectrumModel};
use spikamp::random_matrix::*;
use spikamp::spectral::*;
use spikamp::Error;

#[test]
fn square_summary_finds_the_outlier() {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let th = mp.spectral_threshold().value;
    let alpha = 3.0 * th;
    let inst = build_square_instance(600, alpha, &mp, Prior::Rademacher, 21).unwrap();
    let s = spectral_summary(&inst.x, Kind::Square).unwrap();
    let expect = mp.invert(Inverse::Ginv, 1.0 / alpha).unwrap();
    assert!((s.top_value - expect).abs() < 0.1, "{} vs {expect}", s.top_value);
    assert_eq!(s.bulk_values.len(), 599);
    let nrm: f64 = s.top_left.iter().map(|x| x * x).sum();
    assert!((nrm - 1.0).abs() < 1e-12);
    let a = estimate_alpha(&s).unwrap();
    assert!((a - alpha).abs() / alpha < 0.1, "{a} vs {alpha}");
}

#[test]
fn rectangular_summary_is_consistent() {
    let uss = SpectrumModel::uniform_squared_singular(0.5).unwrap();
    let th = uss.reference_threshold().unwrap();
    let alpha = 2.5 * th * 0.5f64.sqrt();
    let inst = build_rect_instance(300, 600, alpha, &uss, Prior::Rademacher, Prior::GaussianSphere, 5).unwrap();
    let s = spectral_summary(&inst.x, inst.kind).unwrap();
    let u = &s.top_left;
    let v = s.top_right.as_ref().unwrap();
    // X v = sigma u for the top triplet
    let xv: Vec<f64> = (0..300).map(|i| (0..600).map(|j| inst.x[(i, j)] * v[j]).sum()).collect();
    for i in 0..300 {
        assert!((xv[i] - s.top_value * u[i]).abs() < 1e-8);
    }
    let a = estimate_alpha(&s).unwrap();
    assert!((a - alpha).abs() / alpha < 0.1, "{a} vs {alpha}");
}

#[test]
fn no_gap_below_threshold() {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let th = mp.spectral_threshold().value;
    let inst = build_square_instance(400, 0.3 * th, &mp, Prior::Rademacher, 8).unwrap();
    let s = spectral_summary(&inst.x, Kind::Square).unwrap();
    assert!(matches!(estimate_alpha(&s), Err(Error::NoSpectralGap { .. })));
}

#[test]
fn bulk_moments_skip_the_top_value() {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let inst = build_square_instance(200, 6.0, &mp, Prior::Rademacher, 3).unwrap();
    let s = spectral_summary(&inst.x, Kind::Square).unwrap();
    let m = s.bulk_moments(3).unwrap();
    let direct: f64 = s.bulk_values.iter().sum::<f64>() / 200.0;
    assert!((m.values()[0] - direct).abs() < 1e-12);
}

#[test]
fn power_iteration_agrees_with_dense_decomposition() {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let inst = build_square_instance(300, 8.0, &mp, Prior::Rademacher, 12).unwrap();
    let s = spectral_summary(&inst.x, Kind::Square).unwrap();
    let (l, v) = top_eigenpair(&inst.x, 1e-12, None).unwrap();
    assert!((l - s.top_value).abs() < 1e-8);
    let dot: f64 = v.iter().zip(&s.top_left).map(|(a, b)| a * b).sum();
    assert!(dot.abs() > 1.0 - 1e-8);
}
