mod common;

use ggm_mac::linalg;
use ggm_mac::solver::{glasso_solve_matrix, kkt_residuals, SolverConfig, WarmStart};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn matches_primal_oracle_on_small_inputs() {
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let s = common::lcg_spd(3, seed);
        for lambda in [0.02, 0.1] {
            let cfg = SolverConfig::with_lambda(lambda);
            let r = glasso_solve_matrix(&s, &cfg).unwrap();
            let (oracle, oracle_obj) = common::ista_glasso(&s, lambda);
            let obj = common::primal_objective(&r.theta_hat, &s, lambda).unwrap();
            worst.0 = worst.0.max((obj - oracle_obj).abs());
            worst.1 = worst.1.max(linalg::max_abs_diff(&r.theta_hat, &oracle));
            let (e, n, dg) = kkt_residuals(&s, &r, &cfg).unwrap();
            assert!(
                e.max(n).max(dg) < 10.0 * cfg.duality_tol,
                "seed {seed} λ {lambda}: kkt {e} {n} {dg}"
            );
        }
    }
    assert!(
        worst.0 < 1e-6 && worst.1 < 1e-4,
        "worst objective gap {} / entry gap {}",
        worst.0,
        worst.1
    );
}

#[test]
fn zero_penalty_inverts() {
    let s = common::lcg_spd(5, 9);
    let cfg = SolverConfig {
        lambda: 0.0,
        duality_tol: 1e-9,
        inner_tol: 1e-12,
        ..Default::default()
    };
    let r = glasso_solve_matrix(&s, &cfg).unwrap();
    let inv = s.clone().try_inverse().unwrap();
    assert!(linalg::max_abs_diff(&r.theta_hat, &inv) < 1e-6);
}

#[test]
fn large_penalty_gives_diagonal() {
    let s = common::lcg_spd(6, 4);
    let max_off = (0..6)
        .flat_map(|j| (0..6).filter(move |&k| k != j).map(move |k| (j, k)))
        .map(|p| s[p].abs())
        .fold(0.0, f64::max);
    let r = glasso_solve_matrix(&s, &SolverConfig::with_lambda(max_off * 1.001)).unwrap();
    assert!(r.edges.is_empty());
    for j in 0..6 {
        assert!((r.theta_hat[(j, j)] - 1.0 / s[(j, j)]).abs() < 1e-9);
    }
}

#[test]
fn objective_trace_is_nonincreasing() {
    for seed in 0..10 {
        let s = common::lcg_spd(8, 100 + seed);
        let r = glasso_solve_matrix(&s, &SolverConfig::with_lambda(0.05)).unwrap();
        for w in r.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-10,
                "seed {seed}: trace {:?}",
                r.objective_trace
            );
        }
    }
}

#[test]
fn known_diagonal_penalty_case() {
    let s = DMatrix::identity(4, 4);
    let cfg = SolverConfig {
        lambda: 0.1,
        penalize_diagonal: true,
        ..Default::default()
    };
    let r = glasso_solve_matrix(&s, &cfg).unwrap();
    assert!(linalg::max_abs_diff(&r.theta_hat, &(DMatrix::identity(4, 4) / 1.1)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn warm_starts_agree(seed in 0u64..10_000, d in 2usize..7, lambda in 0.01f64..0.3) {
        let s = common::lcg_spd(d, seed);
        let tight = SolverConfig { lambda, duality_tol: 1e-9, inner_tol: 1e-12, ..Default::default() };
        let a = glasso_solve_matrix(&s, &tight).unwrap();
        let b = glasso_solve_matrix(&s, &SolverConfig { warm_start: WarmStart::Diagonal, ..tight.clone() }).unwrap();
        prop_assert!(linalg::max_abs_diff(&a.theta_hat, &b.theta_hat) < 1e-5);
    }

    #[test]
    fn solution_is_symmetric_pd_and_kkt(seed in 0u64..10_000, d in 2usize..8, lambda in 0.01f64..0.5) {
        let s = common::lcg_spd(d, seed);
        let cfg = SolverConfig::with_lambda(lambda);
        let r = glasso_solve_matrix(&s, &cfg).unwrap();
        prop_assert!(r.converged);
        prop_assert!(linalg::is_symmetric(&r.theta_hat, 0.0));
        prop_assert!(linalg::is_positive_definite(&r.theta_hat));
        let (e, n, dg) = kkt_residuals(&s, &r, &cfg).unwrap();
        prop_assert!(e.max(n).max(dg) < 10.0 * cfg.duality_tol, "kkt {} {} {}", e, n, dg);
    }

    #[test]
    fn relabeling_commutes(seed in 0u64..10_000, d in 2usize..7, lambda in 0.02f64..0.3, rot in 0usize..7) {
        let s = common::lcg_spd(d, seed);
        let perm: Vec<usize> = (0..d).map(|i| (i + rot) % d).collect();
        let sp = DMatrix::from_fn(d, d, |i, j| s[(perm[i], perm[j])]);
        let cfg = SolverConfig { lambda, duality_tol: 1e-9, inner_tol: 1e-12, ..Default::default() };
        let a = glasso_solve_matrix(&s, &cfg).unwrap();
        let b = glasso_solve_matrix(&sp, &cfg).unwrap();
        let ap = DMatrix::from_fn(d, d, |i, j| a.theta_hat[(perm[i], perm[j])]);
        prop_assert!(linalg::max_abs_diff(&ap, &b.theta_hat) < 1e-5);
    }
}
