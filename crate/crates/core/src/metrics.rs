//! Structure-recovery scoring and sample-size calculators.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{GgmModel, ModelConstants};
use crate::pipeline::Pipeline;
use crate::seeds::{self, stream};
use crate::solver::SolverResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport {
    pub tpr: f64,
    pub fpr: f64,
    pub exact_recovery: bool,
    /// Exact support and matching signs on every true edge.
    pub sign_consistent: bool,
    pub n_true_edges: usize,
    pub n_pred_edges: usize,
}

/// Compare the estimated support with the truth over unordered off-diagonal
/// pairs.
pub fn score(truth: &GgmModel, result: &SolverResult) -> Result<RecoveryReport> {
    let d = truth.dim();
    if result.theta_hat.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: result.theta_hat.nrows(),
        });
    }
    let true_edges = truth.edges();
    let pred = &result.edges;
    let hits = pred.intersection(true_edges).count();
    let false_pos = pred.len() - hits;
    let pairs = d * (d - 1) / 2;
    let non_edges = pairs - true_edges.len();
    let tpr = if true_edges.is_empty() {
        1.0
    } else {
        hits as f64 / true_edges.len() as f64
    };
    let fpr = if non_edges == 0 {
        0.0
    } else {
        false_pos as f64 / non_edges as f64
    };
    let exact_recovery = pred == true_edges;
    let sign_consistent = exact_recovery
        && true_edges.iter().all(|&(j, k)| {
            let t = truth.precision()[(j, k)];
            let e = result.theta_hat[(j, k)];
            t.signum() == e.signum()
        });
    Ok(RecoveryReport {
        tpr,
        fpr,
        exact_recovery,
        sign_consistent,
        n_true_edges: true_edges.len(),
        n_pred_edges: pred.len(),
    })
}

/// Constants and sample-size thresholds of the two recovery guarantees.
///
/// `*_a` thresholds guarantee no false edges; `*_b` thresholds guarantee
/// sign-consistent exact recovery. All hold with probability `1 − d²ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremBounds {
    pub c_sign: f64,
    pub t_sign: f64,
    pub c_uncoded: f64,
    pub t_uncoded: f64,
    pub n_min_sign_a: f64,
    pub n_min_sign_b: f64,
    pub n_min_uncoded_a: f64,
    pub n_min_uncoded_b: f64,
}

impl TheoremBounds {
    /// Part (b) needs at least as many samples as part (a) whenever
    /// `T ≥ C·Δ`, for both methods.
    pub fn ordering_holds(&self, max_degree: usize) -> bool {
        let delta = max_degree as f64;
        let sign_ok = self.t_sign < self.c_sign * delta || self.n_min_sign_b >= self.n_min_sign_a;
        let unc_ok =
            self.t_uncoded < self.c_uncoded * delta || self.n_min_uncoded_b >= self.n_min_uncoded_a;
        sign_ok && unc_ok
    }
}

/// Evaluate both guarantees for a model, the Uncoded channel constant `c`
/// and confidence parameter `ε`.
pub fn theorem_bounds(
    constants: &ModelConstants,
    model: &GgmModel,
    chan_c: f64,
    epsilon: f64,
) -> Result<TheoremBounds> {
    let d = model.dim() as f64;
    if !(epsilon > 0.0 && epsilon <= 1.0 / (d * d)) {
        return Err(Error::invalid(format!(
            "epsilon {epsilon} outside (0, d⁻²]"
        )));
    }
    if !(chan_c > 0.0) {
        return Err(Error::invalid("channel constant c must be positive"));
    }
    Ok(bounds_from_parts(
        constants.alpha,
        constants.kappa_sigma,
        constants.kappa_gamma,
        model.max_degree() as f64,
        model.theta_min(),
        chan_c,
        epsilon,
    ))
}

/// The bound formulas on raw parameters.
pub fn bounds_from_parts(
    alpha: f64,
    kappa_sigma: f64,
    kappa_gamma: f64,
    max_degree: f64,
    theta_min: f64,
    chan_c: f64,
    epsilon: f64,
) -> TheoremBounds {
    let k = (kappa_sigma * kappa_gamma).max(kappa_sigma.powi(3) * kappa_gamma.powi(2));
    let inner = (kappa_gamma / theta_min).max(3.0 * max_degree * k);
    let root2 = 2f64.sqrt();
    let root2c = (2.0 * chan_c).sqrt();
    let c_sign = 3.0 * root2 * PI * k;
    let t_sign = root2 * PI * inner;
    let c_uncoded = 6.0 * root2c * k;
    let t_uncoded = 2.0 * root2c * inner;
    let growth = (1.0 + 8.0 / alpha).powi(2);
    let ln2 = (2.0 / epsilon).ln();
    let ln8 = (8.0 / epsilon).ln();
    let dd = max_degree * max_degree;
    TheoremBounds {
        c_sign,
        t_sign,
        c_uncoded,
        t_uncoded,
        n_min_sign_a: c_sign * c_sign * dd * growth * ln2,
        n_min_sign_b: t_sign * t_sign * growth * ln2,
        n_min_uncoded_a: c_uncoded * c_uncoded * dd * growth * ln8,
        n_min_uncoded_b: t_uncoded * t_uncoded * growth * ln8,
    }
}

/// Empirical recovery rates over independent trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryRate {
    pub exact: f64,
    pub sign_consistent: f64,
    pub trials: usize,
    /// Trials whose solve did not converge (still scored).
    pub unconverged: usize,
}

/// Fraction of `trials` with exact support recovery. Each trial draws fresh
/// samples and channel noise from a stream derived from `master_seed`.
pub fn recovery_probability(
    model: &GgmModel,
    pipeline: &Pipeline,
    n: usize,
    trials: usize,
    master_seed: u64,
) -> Result<f64> {
    Ok(recovery_rate(model, pipeline, n, trials, master_seed)?.exact)
}

/// [`recovery_probability`] with sign consistency and convergence counts.
pub fn recovery_rate(
    model: &GgmModel,
    pipeline: &Pipeline,
    n: usize,
    trials: usize,
    master_seed: u64,
) -> Result<RecoveryRate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let outcomes: Vec<(bool, bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = seeds::derive_indexed(master_seed, stream::TRIAL, t as u64);
            let out = pipeline.run_trial(model, n, seed)?;
            Ok((
                out.report.exact_recovery,
                out.report.sign_consistent,
                out.result.converged,
            ))
        })
        .collect::<Result<_>>()?;
    let count = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count();
    Ok(RecoveryRate {
        exact: count(|o| o.0) as f64 / trials as f64,
        sign_consistent: count(|o| o.1) as f64 / trials as f64,
        trials,
        unconverged: count(|o| !o.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_star_model, identity_model};
    use nalgebra::DMatrix;
    use std::collections::BTreeSet;

    fn result_with(theta: DMatrix<f64>, edges: BTreeSet<(usize, usize)>) -> SolverResult {
        SolverResult {
            sigma_hat: theta.clone(),
            theta_hat: theta,
            edges,
            objective_trace: vec![],
            converged: true,
            sweeps_used: 1,
            pd_repairs: 0,
        }
    }

    #[test]
    fn perfect_prediction() {
        let m = generate_star_model(4, 0.3).unwrap();
        let r = score(&m, &result_with(m.precision().clone(), m.edges().clone())).unwrap();
        assert_eq!(
            (r.tpr, r.fpr, r.exact_recovery, r.sign_consistent),
            (1.0, 0.0, true, true)
        );
    }

    #[test]
    fn empty_prediction() {
        let m = generate_star_model(4, 0.3).unwrap();
        let r = score(&m, &result_with(DMatrix::identity(4, 4), BTreeSet::new())).unwrap();
        assert_eq!(
            (r.tpr, r.fpr, r.exact_recovery, r.sign_consistent),
            (0.0, 0.0, false, false)
        );
    }

    #[test]
    fn full_prediction_saturates() {
        let m = generate_star_model(4, 0.3).unwrap();
        let all: BTreeSet<_> = (0..4)
            .flat_map(|j| ((j + 1)..4).map(move |k| (j, k)))
            .collect();
        let r = score(&m, &result_with(DMatrix::from_element(4, 4, -0.1), all)).unwrap();
        assert_eq!((r.tpr, r.fpr), (1.0, 1.0));
    }

    #[test]
    fn flipped_sign_is_not_sign_consistent() {
        let m = generate_star_model(3, 0.3).unwrap();
        let r = score(&m, &result_with(-m.precision().clone(), m.edges().clone())).unwrap();
        assert!(r.exact_recovery && !r.sign_consistent);
    }

    #[test]
    fn identity_bounds_plug_in() {
        let d = 6;
        let m = identity_model(d).unwrap();
        let c = crate::model::compute_constants(&m).unwrap();
        let eps = 1.0 / (d * d) as f64;
        let b = theorem_bounds(&c, &m, 3200.0, eps).unwrap();
        let c_sign = 3.0 * 2f64.sqrt() * PI;
        assert!((b.c_sign - c_sign).abs() < 1e-12);
        let expect = c_sign * c_sign * 81.0 * (2.0 * (d * d) as f64).ln();
        assert!((b.n_min_sign_a - expect).abs() < 1e-9 * expect);
        assert!(b.ordering_holds(m.max_degree()));
        assert!(theorem_bounds(&c, &m, 3200.0, 0.5).is_err());
    }

    #[test]
    fn doubling_degree_quadruples_part_a() {
        let a = bounds_from_parts(0.5, 2.0, 3.0, 2.0, 0.3, 4000.0, 1e-3);
        let b = bounds_from_parts(0.5, 2.0, 3.0, 4.0, 0.3, 4000.0, 1e-3);
        assert!((b.n_min_sign_a / a.n_min_sign_a - 4.0).abs() < 1e-12);
        assert!((b.n_min_uncoded_a / a.n_min_uncoded_a - 4.0).abs() < 1e-12);
    }
}
