// Separate binary: the cap is read from the process environment.
use spikamp::free_probability::SpectrumModel;
use spikamp::random_matrix::*;
use spikamp::Error;

#[test]
fn environment_overrides_the_dense_cap() {
    std::env::set_var(DENSE_CAP_ENV, "40");
    assert_eq!(dense_cap(), 40);
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let err = build_square_instance(41, 1.0, &mp, Prior::Rademacher, 0).unwrap_err();
    assert!(matches!(err, Error::Allocation { requested: 41, cap: 40 }));
    assert!(build_square_instance(40, 1.0, &mp, Prior::Rademacher, 0).is_ok());
    std::env::remove_var(DENSE_CAP_ENV);
    assert_eq!(dense_cap(), DEFAULT_DENSE_CAP);
}
