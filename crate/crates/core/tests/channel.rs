mod common;

use ggm_mac::channel::{
    self, fading_gains, rate_region_feasible, ChannelSpec, CheckMode, FadingModel, SignsLink,
};
use ggm_mac::estimators::{self, sample_covariance};
use ggm_mac::linalg;
use ggm_mac::model::{generate_random_model, RandomModelSpec};
use ggm_mac::{Error, Method, Pipeline, SolverConfig};
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn real_block_is_complex_multiplication() {
    let h = fading_gains(4, FadingModel::ComplexNormal, 3);
    let spec = ChannelSpec::new(h.clone(), 2.5, 1.0).unwrap();
    let chan = channel::build_real_block(&spec).unwrap();
    let x: DVector<Complex<f64>> =
        DVector::from_fn(4, |i, _| Complex::new(i as f64 - 1.5, 0.3 * i as f64));
    let y = &h * &x * Complex::new((2.5f64 / 2.0).sqrt(), 0.0);
    let stacked = DVector::from_fn(8, |i, _| if i < 4 { x[i].re } else { x[i - 4].im });
    let out = chan.h_tilde() * stacked;
    for i in 0..4 {
        assert!((out[i] - y[i].re).abs() < 1e-12);
        assert!((out[i + 4] - y[i].im).abs() < 1e-12);
    }
}

#[test]
fn noiseless_uncoded_matches_sample_covariance_for_any_gains() {
    let m = generate_random_model(&RandomModelSpec::new(5, 0.4, 3), 2).unwrap();
    let s = m.sample(600, 5).unwrap();
    let plain = sample_covariance(&s).unwrap();
    for fading in [FadingModel::RealNormal, FadingModel::ComplexNormal] {
        let spec = ChannelSpec::rayleigh(5, fading, 4.0, 0.0, 9).unwrap();
        let p = Pipeline::new(Method::Uncoded, Some(&spec), SolverConfig::default()).unwrap();
        let err = linalg::max_abs_diff(p.estimate(&s, 0).unwrap().matrix(), plain.matrix());
        assert!(err < 1e-9, "{fading:?}: {err}");
    }
}

#[test]
fn demixed_noise_at_identity_gains() {
    let spec = ChannelSpec::from_snr(DMatrix::identity(3, 3), 3.0).unwrap();
    let v = channel::demixed_noise_variances(&channel::build_real_block(&spec).unwrap());
    for x in v {
        assert!((x - 2.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn signs_gate_follows_the_rate_region() {
    // Scalar channel: one bit per use needs lg(1 + snr) ≥ 1, so snr ≥ 1.
    let low = ChannelSpec::identity(1, 0.99, 1.0).unwrap();
    assert!(matches!(
        SignsLink::admit(&low),
        Err(Error::RateRegionViolated { .. })
    ));
    assert!(SignsLink::admit(&ChannelSpec::identity(1, 1.0, 1.0).unwrap()).is_ok());
    assert!(SignsLink::admit(&ChannelSpec::identity(3, 1e-3, 0.0).unwrap()).is_ok());
    assert!(matches!(
        rate_region_feasible(&ChannelSpec::identity(2, 1.0, 0.0).unwrap(), &[1.0, 1.0]),
        Err(Error::Unconstrained)
    ));
}

#[test]
fn large_dimension_uses_partial_check() {
    let spec = ChannelSpec::from_snr(DMatrix::identity(24, 24), 3.0).unwrap();
    let r = rate_region_feasible(&spec, &[1.0; 24]).unwrap();
    assert_eq!(r.mode, CheckMode::Partial);
    assert!(r.feasible);
    let small = rate_region_feasible(
        &ChannelSpec::from_snr(DMatrix::identity(6, 6), 3.0).unwrap(),
        &[1.0; 6],
    )
    .unwrap();
    assert_eq!(small.mode, CheckMode::Exhaustive);
    assert_eq!(small.subsets_checked, 63);
}

#[test]
fn rejects_singular_and_non_square_gains() {
    let sing = DMatrix::from_element(2, 2, Complex::new(1.0, 0.0));
    assert!(matches!(
        ChannelSpec::new(sing, 1.0, 1.0),
        Err(Error::Singular { .. })
    ));
    assert!(ChannelSpec::new(
        DMatrix::from_element(2, 3, Complex::new(1.0, 0.0)),
        1.0,
        1.0
    )
    .is_err());
    assert!(ChannelSpec::identity(2, -1.0, 1.0).is_err());
}

#[test]
fn uncoded_estimate_is_unbiased_with_noise() {
    let m = generate_random_model(&RandomModelSpec::new(4, 0.5, 3), 6).unwrap();
    let spec = ChannelSpec::rayleigh(4, FadingModel::ComplexNormal, 10.0, 1.0, 4).unwrap();
    let p = Pipeline::new(Method::Uncoded, Some(&spec), SolverConfig::default()).unwrap();
    let trials = 200;
    let mut mean = DMatrix::zeros(4, 4);
    for t in 0..trials {
        let s = m.sample(2000, 100 + t).unwrap();
        mean += p.estimate(&s, 7000 + t).unwrap().matrix();
    }
    mean /= trials as f64;
    assert!(linalg::max_abs_diff(&mean, m.covariance()) < 0.03);
    assert!(estimators::uncoded_tail_constant(&channel::build_real_block(&spec).unwrap()) > 3200.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_region_matches_brute_force(
        seed in 0u64..10_000,
        d in 1usize..7,
        snr in 0.1f64..20.0,
        complex in any::<bool>(),
        rates in prop::collection::vec(0.0f64..3.0, 6),
    ) {
        let fading = if complex { FadingModel::ComplexNormal } else { FadingModel::RealNormal };
        let h = fading_gains(d, fading, seed);
        prop_assume!(ChannelSpec::from_snr(h.clone(), snr).is_ok());
        let spec = ChannelSpec::from_snr(h.clone(), snr).unwrap();
        let rates = &rates[..d];
        let r = rate_region_feasible(&spec, rates).unwrap();
        let oracle = common::min_rate_slack(&h, snr, rates);
        prop_assert!((r.tightest_slack - oracle).abs() < 1e-8 * (1.0 + oracle.abs()), "{} vs {}", r.tightest_slack, oracle);
        prop_assert_eq!(r.feasible, oracle >= -1e-9);
        let subset_sum: f64 = r.tightest_subset.iter().map(|&j| rates[j]).sum();
        let cap = common::subset_capacity_bits(&h, snr, &r.tightest_subset);
        prop_assert!((cap - subset_sum - oracle).abs() < 1e-8 * (1.0 + oracle.abs()));
    }

    #[test]
    fn slack_grows_with_snr(seed in 0u64..10_000, d in 1usize..6, snr in 0.1f64..10.0, bump in 1.01f64..4.0) {
        let h = fading_gains(d, FadingModel::ComplexNormal, seed);
        let ones = vec![1.0; d];
        let a = ChannelSpec::from_snr(h.clone(), snr).unwrap();
        let b = ChannelSpec::from_snr(h, snr * bump).unwrap();
        let sa = rate_region_feasible(&a, &ones).unwrap().tightest_slack;
        let sb = rate_region_feasible(&b, &ones).unwrap().tightest_slack;
        prop_assert!(sb > sa);
    }
}
