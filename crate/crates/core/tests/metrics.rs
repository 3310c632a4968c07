use std::collections::BTreeSet;

use ggm_mac::metrics::{bounds_from_parts, recovery_rate, score, theorem_bounds};
use ggm_mac::model::{
    compute_constants, generate_random_model, generate_star_model, GgmModel, RandomModelSpec,
};
use ggm_mac::{Method, Pipeline, SolverConfig, SolverResult};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn permute(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], perm[j])])
}

fn relabel(model: &GgmModel, r: &SolverResult, perm: &[usize]) -> (GgmModel, SolverResult) {
    let inv: Vec<usize> = {
        let mut v = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            v[p] = i;
        }
        v
    };
    let m = GgmModel::from_parts(
        permute(model.precision(), perm),
        permute(model.covariance(), perm),
        None,
    )
    .unwrap();
    let edges: BTreeSet<(usize, usize)> = r
        .edges
        .iter()
        .map(|&(j, k)| (inv[j].min(inv[k]), inv[j].max(inv[k])))
        .collect();
    let out = SolverResult {
        theta_hat: permute(&r.theta_hat, perm),
        sigma_hat: permute(&r.sigma_hat, perm),
        edges,
        ..r.clone()
    };
    (m, out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_are_invariant_under_relabeling(seed in 0u64..10_000, d in 3usize..10, rot in 1usize..10, lambda in 0.02f64..0.3) {
        let m = generate_random_model(&RandomModelSpec::new(d, 0.3, 3), seed).unwrap();
        let p = Pipeline::original(SolverConfig::with_lambda(lambda));
        let out = p.run_trial(&m, 300, seed).unwrap();
        let perm: Vec<usize> = (0..d).map(|i| (i + rot) % d).collect();
        let (pm, pr) = relabel(&m, &out.result, &perm);
        prop_assert_eq!(score(&pm, &pr).unwrap(), out.report);
    }

    #[test]
    fn bounds_are_monotone(
        alpha in 0.05f64..1.0,
        ks in 1.0f64..5.0,
        kg in 1.0f64..20.0,
        delta in 1.0f64..10.0,
        tmin in 0.05f64..1.0,
        c in 3200.0f64..1e5,
        eps in 1e-6f64..1e-2,
        up in 1.01f64..3.0,
    ) {
        let base = bounds_from_parts(alpha, ks, kg, delta, tmin, c, eps);
        let more_c = bounds_from_parts(alpha, ks, kg, delta, tmin, c * up, eps);
        let worse_alpha = bounds_from_parts(alpha / up, ks, kg, delta, tmin, c, eps);
        let tighter_eps = bounds_from_parts(alpha, ks, kg, delta, tmin, c, eps / up);
        let smaller_signal = bounds_from_parts(alpha, ks, kg, delta, tmin / up, c, eps);
        prop_assert!(more_c.n_min_uncoded_b > base.n_min_uncoded_b);
        prop_assert_eq!(more_c.n_min_sign_b, base.n_min_sign_b);
        prop_assert!(worse_alpha.n_min_sign_a > base.n_min_sign_a);
        prop_assert!(worse_alpha.n_min_uncoded_b > base.n_min_uncoded_b);
        prop_assert!(tighter_eps.n_min_sign_b > base.n_min_sign_b);
        prop_assert!(smaller_signal.n_min_sign_b >= base.n_min_sign_b);
        prop_assert!(base.n_min_uncoded_b > base.n_min_sign_b);
    }
}

#[test]
fn hand_scored_report() {
    let m = generate_star_model(4, 0.3).unwrap();
    let theta = DMatrix::from_diagonal(&DVector::from_element(4, 1.0));
    let r = SolverResult {
        sigma_hat: theta.clone(),
        theta_hat: theta,
        edges: [(0, 1), (0, 2), (1, 2)].into_iter().collect(),
        objective_trace: vec![],
        converged: true,
        sweeps_used: 1,
        pd_repairs: 0,
    };
    let rep = score(&m, &r).unwrap();
    assert!((rep.tpr - 2.0 / 3.0).abs() < 1e-15);
    assert!((rep.fpr - 1.0 / 3.0).abs() < 1e-15);
    assert!(!rep.exact_recovery);
}

#[test]
fn bounds_reject_bad_epsilon_and_order_parts() {
    let m = generate_star_model(10, 0.3).unwrap();
    let c = compute_constants(&m).unwrap();
    assert!(theorem_bounds(&c, &m, 4000.0, 0.1).is_err());
    assert!(theorem_bounds(&c, &m, 0.0, 1e-3).is_err());
    let b = theorem_bounds(&c, &m, 4000.0, 0.005).unwrap();
    assert!(b.ordering_holds(m.max_degree()));
}

#[test]
fn recovery_rate_is_reproducible() {
    let m = generate_star_model(6, 0.4).unwrap();
    let p = Pipeline::new(
        Method::Signs,
        Some(&ggm_mac::ChannelSpec::from_snr(DMatrix::identity(6, 6), 3.0).unwrap()),
        SolverConfig::with_lambda(0.1),
    )
    .unwrap();
    let a = recovery_rate(&m, &p, 1500, 20, 3).unwrap();
    let b = recovery_rate(&m, &p, 1500, 20, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.exact >= a.sign_consistent);
}
