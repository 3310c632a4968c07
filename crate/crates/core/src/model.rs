//! Ground-truth Gaussian graphical models: generation, structural constants
//! and sampling.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::seeds::{self, stream};

/// Relative tolerance for `Θ·Q = I` and the unit diagonal of `Q`.
pub const MODEL_TOL: f64 = 1e-10;

/// Entries of an inverted precision matrix below this are treated as zero.
pub const INVERSION_CLEANUP: f64 = 1e-12;

/// Default cap on `d` for [`compute_constants`]; Γ has `d⁴` entries.
pub const DEFAULT_CONSTANTS_CAP: usize = 150;

/// Default relative diagonal margin of the random recipe.
pub const DEFAULT_DIAG_MARGIN: f64 = 1.0;

/// An unordered off-diagonal edge `(j, k)` with `j < k`.
pub type Edge = (usize, usize);

/// A zero-mean Gaussian graphical model with unit variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GgmModel {
    precision: DMatrix<f64>,
    covariance: DMatrix<f64>,
    edges: BTreeSet<Edge>,
    max_degree: usize,
    theta_min: f64,
    seed: Option<u64>,
}

impl GgmModel {
    /// Assemble a model from a precision matrix and its inverse. The edge set
    /// is read off the exact nonzeros of `precision`.
    pub fn from_parts(
        precision: DMatrix<f64>,
        covariance: DMatrix<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let d = precision.nrows();
        if d == 0 || !precision.is_square() {
            return Err(Error::invalid(
                "precision must be a non-empty square matrix",
            ));
        }
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        let mut edges = BTreeSet::new();
        for j in 0..d {
            for k in (j + 1)..d {
                if precision[(j, k)] != 0.0 {
                    edges.insert((j, k));
                }
            }
        }
        let mut degree = vec![0usize; d];
        for &(j, k) in &edges {
            degree[j] += 1;
            degree[k] += 1;
        }
        let max_degree = degree.iter().copied().max().unwrap_or(0).max(1);
        let theta_min = edges
            .iter()
            .map(|&(j, k)| precision[(j, k)].abs())
            .fold(f64::INFINITY, f64::min);
        let model = GgmModel {
            precision,
            covariance,
            edges,
            max_degree,
            theta_min,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    /// Build from a precision matrix alone, inverting it for the covariance.
    pub fn from_precision(precision: DMatrix<f64>, seed: Option<u64>) -> Result<Self> {
        let covariance = linalg::inverse_spd(&precision)
            .ok_or_else(|| Error::NotPositiveDefinite("precision matrix".into()))?;
        Self::from_parts(precision, covariance, seed)
    }

    /// Check every structural invariant of the model.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let theta = &self.precision;
        let q = &self.covariance;
        if !linalg::is_symmetric(theta, 0.0) {
            return Err(Error::invalid("precision matrix is not symmetric"));
        }
        if !linalg::is_positive_definite(theta) {
            return Err(Error::NotPositiveDefinite("precision matrix".into()));
        }
        let resid = linalg::max_abs_diff(&(theta * q), &DMatrix::identity(d, d));
        let scale = linalg::max_abs(theta).max(1.0);
        if resid > MODEL_TOL * scale {
            return Err(Error::invalid(format!(
                "precision·covariance deviates from identity by {resid:e}"
            )));
        }
        for j in 0..d {
            if (q[(j, j)] - 1.0).abs() > MODEL_TOL {
                return Err(Error::invalid(format!(
                    "covariance diagonal ({j},{j}) = {} is not 1",
                    q[(j, j)]
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Off-diagonal edges, `j < k`.
    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        let key = if j < k { (j, k) } else { (k, j) };
        self.edges.contains(&key)
    }

    /// The support `S(Θ)` as ordered pairs, diagonal included, in row-major
    /// order.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        (0..d)
            .flat_map(|j| (0..d).map(move |k| (j, k)))
            .filter(|&(j, k)| j == k || self.has_edge(j, k))
            .collect()
    }

    /// Maximum vertex degree Δ. Edgeless graphs report 1 so the sample-size
    /// bounds stay finite.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Smallest `|Θ_jk|` over edges; `+∞` for edgeless graphs.
    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.dim()];
        for &(j, k) in &self.edges {
            degree[j] += 1;
            degree[k] += 1;
        }
        degree
    }

    /// Draw `n` i.i.d. rows from `N(0, Q)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        sample(self, n, seed)
    }
}

/// Recipe for random sparse models.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModelSpec {
    pub d: usize,
    pub edge_prob: f64,
    pub max_degree: usize,
    pub weight_low: f64,
    pub weight_high: f64,
    /// Regenerate until the incoherence condition holds.
    pub require_incoherence: bool,
    pub retry_budget: usize,
    /// Forwarded to [`compute_constants_capped`].
    pub constants_cap: usize,
    /// Extra diagonal shift beyond `|λ_min|`, as a fraction of `|λ_min|`.
    pub diag_margin: f64,
}

impl RandomModelSpec {
    pub fn new(d: usize, edge_prob: f64, max_degree: usize) -> Self {
        RandomModelSpec {
            d,
            edge_prob,
            max_degree,
            weight_low: -1.0,
            weight_high: 1.0,
            require_incoherence: true,
            retry_budget: 100,
            constants_cap: DEFAULT_CONSTANTS_CAP,
            diag_margin: DEFAULT_DIAG_MARGIN,
        }
    }

    pub fn weights(mut self, low: f64, high: f64) -> Self {
        self.weight_low = low;
        self.weight_high = high;
        self
    }

    pub fn require_incoherence(mut self, yes: bool) -> Self {
        self.require_incoherence = yes;
        self
    }

    fn check(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid(format!(
                "d must be at least 2, got {}",
                self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::invalid(format!(
                "edge_prob {} outside [0, 1]",
                self.edge_prob
            )));
        }
        if self.max_degree == 0 {
            return Err(Error::invalid("max_degree must be positive"));
        }
        if !(self.weight_low < self.weight_high) {
            return Err(Error::invalid("weight_low must be below weight_high"));
        }
        if !(self.diag_margin >= 0.0) {
            return Err(Error::invalid("diag_margin must be ≥ 0"));
        }
        if self.retry_budget == 0 {
            return Err(Error::invalid("retry_budget must be positive"));
        }
        Ok(())
    }
}

/// Generate a random sparse model.
///
/// Edges are proposed over all pairs in a random order, each kept with
/// probability `edge_prob` unless it would push either endpoint past
/// `max_degree`. Edge weights are uniform on `[weight_low, weight_high)`.
/// The diagonal is shifted by `(1 + diag_margin)·|λ_min| + 0.01`, then both matrices are
/// rescaled so every variance is one. When `require_incoherence` is set the
/// whole draw is repeated from a derived seed until the incoherence
/// condition holds.
pub fn generate_random_model(spec: &RandomModelSpec, seed: u64) -> Result<GgmModel> {
    spec.check()?;
    let mut last_err = None;
    for attempt in 0..spec.retry_budget {
        let attempt_seed = if attempt == 0 {
            seed
        } else {
            seeds::derive_indexed(seed, stream::RETRY, attempt as u64)
        };
        let model = draw_random_model(spec, attempt_seed, seed)?;
        if !spec.require_incoherence {
            return Ok(model);
        }
        match compute_constants_capped(&model, spec.constants_cap) {
            Ok(_) => return Ok(model),
            Err(e @ Error::IncoherenceViolated { .. }) | Err(e @ Error::Singular { .. }) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetryBudgetExhausted {
        attempts: spec.retry_budget,
        reason: last_err.map(|e| e.to_string()).unwrap_or_default(),
    })
}

fn draw_random_model(spec: &RandomModelSpec, seed: u64, reported_seed: u64) -> Result<GgmModel> {
    let d = spec.d;
    let mut rng = seeds::rng(seed);

    let mut pairs: Vec<Edge> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .collect();
    pairs.shuffle(&mut rng);
    let mut degree = vec![0usize; d];
    let mut theta = DMatrix::<f64>::zeros(d, d);
    for (j, k) in pairs {
        let keep = rng.random::<f64>() < spec.edge_prob;
        if !keep || degree[j] >= spec.max_degree || degree[k] >= spec.max_degree {
            continue;
        }
        let mut w = 0.0;
        while w == 0.0 {
            w = rng.random_range(spec.weight_low..spec.weight_high);
        }
        theta[(j, k)] = w;
        theta[(k, j)] = w;
        degree[j] += 1;
        degree[k] += 1;
    }

    let lambda_min = linalg::min_eigenvalue(&theta);
    let shift = lambda_min.abs() * (1.0 + spec.diag_margin) + 0.01;
    for j in 0..d {
        theta[(j, j)] += shift;
    }

    let q = linalg::inverse_spd(&theta)
        .ok_or_else(|| Error::NotPositiveDefinite("shifted precision".into()))?;
    let scale: Vec<f64> = (0..d).map(|j| q[(j, j)].sqrt()).collect();
    // Θ' = D^{1/2} Θ D^{1/2} is the exact inverse of Q' = D^{-1/2} Q D^{-1/2}
    // and keeps the zero pattern bit-exact.
    let theta_n = DMatrix::from_fn(d, d, |j, k| theta[(j, k)] * (scale[j] * scale[k]));
    let mut q_n = DMatrix::from_fn(d, d, |j, k| q[(j, k)] / (scale[j] * scale[k]));
    q_n = linalg::symmetrize(&q_n);
    q_n.fill_diagonal(1.0);
    GgmModel::from_parts(theta_n, q_n, Some(reported_seed))
}

/// Star graph with vertex 0 as hub and hub–leaf correlation `rho`.
///
/// Leaf–leaf correlations are `rho²`, the values implied by the Markov
/// property of a tree, so that the precision matrix is exactly the star.
pub fn generate_star_model(d: usize, rho: f64) -> Result<GgmModel> {
    if d < 2 {
        return Err(Error::invalid(format!("star needs d ≥ 2, got {d}")));
    }
    if !rho.is_finite() || rho == 0.0 {
        return Err(Error::invalid(format!(
            "rho must be finite and nonzero, got {rho}"
        )));
    }
    let mut q = DMatrix::from_element(d, d, rho * rho);
    for l in 1..d {
        q[(0, l)] = rho;
        q[(l, 0)] = rho;
    }
    q.fill_diagonal(1.0);
    let mut theta = linalg::inverse_spd(&q).ok_or_else(|| {
        Error::NotPositiveDefinite(format!("star covariance with d={d}, rho={rho}"))
    })?;
    theta.iter_mut().for_each(|v| {
        if v.abs() < INVERSION_CLEANUP {
            *v = 0.0
        }
    });
    GgmModel::from_parts(theta, q, None)
}

/// The identity model: `d` independent unit-variance coordinates.
pub fn identity_model(d: usize) -> Result<GgmModel> {
    GgmModel::from_parts(DMatrix::identity(d, d), DMatrix::identity(d, d), None)
}

/// Incoherence and covariance-control constants of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub alpha: f64,
    pub kappa_sigma: f64,
    pub kappa_gamma: f64,
    /// `|||Γ_{S^c S} (Γ_SS)⁻¹|||∞`
    pub incoherence_value: f64,
}

/// [`compute_constants_capped`] with the default dimension cap.
pub fn compute_constants(model: &GgmModel) -> Result<ModelConstants> {
    compute_constants_capped(model, DEFAULT_CONSTANTS_CAP)
}

/// Compute α, κ_Σ and κ_Γ from the Hessian `Γ = Q ⊗ Q`.
///
/// Rows and columns of Γ are indexed by ordered pairs with
/// `Γ_{(j,k),(l,m)} = Q_jl Q_km`. Only the `S` columns are ever materialized;
/// the `S^c` rows are streamed in blocks.
pub fn compute_constants_capped(model: &GgmModel, cap: usize) -> Result<ModelConstants> {
    let d = model.dim();
    if d > cap {
        return Err(Error::DimensionTooLarge { d, cap });
    }
    let q = model.covariance();
    let support = model.support();
    let s = support.len();
    let gamma = |(j, k): (usize, usize), (l, m): (usize, usize)| q[(j, l)] * q[(k, m)];

    let gamma_ss = DMatrix::from_fn(s, s, |a, b| gamma(support[a], support[b]));
    let chol = Cholesky::<f64, Dyn>::new(gamma_ss.clone()).ok_or_else(|| Error::Singular {
        what: "Γ_SS",
        condition: linalg::sym_condition(&gamma_ss),
    })?;
    let gamma_ss_inv = linalg::symmetrize(&chol.inverse());
    let kappa_gamma = linalg::max_row_sum(&gamma_ss_inv);
    let kappa_sigma = linalg::max_row_sum(q);

    let complement: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (0..d).map(move |k| (j, k)))
        .filter(|&(j, k)| j != k && !model.has_edge(j, k))
        .collect();
    const BLOCK: usize = 256;
    let incoherence_value = complement
        .par_chunks(BLOCK)
        .map(|rows| {
            let block = DMatrix::from_fn(rows.len(), s, |r, c| gamma(rows[r], support[c]));
            linalg::max_row_sum(&(block * &gamma_ss_inv))
        })
        .reduce(|| 0.0, f64::max);

    if incoherence_value >= 1.0 {
        return Err(Error::IncoherenceViolated {
            value: incoherence_value,
        });
    }
    Ok(ModelConstants {
        alpha: (1.0 - incoherence_value).min(1.0),
        kappa_sigma,
        kappa_gamma,
        incoherence_value,
    })
}

/// `n × d` matrix of samples; column `j` is held by machine `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix(DMatrix<f64>);

impl SampleMatrix {
    pub fn new(m: DMatrix<f64>) -> Self {
        SampleMatrix(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Draw `n` rows i.i.d. `N(0, Q)` through the Cholesky factor of `Q`.
pub fn sample(model: &GgmModel, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let d = model.dim();
    let chol = model
        .covariance()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("covariance".into()))?;
    let lt = chol.l().transpose();
    let mut rng = seeds::rng(seed);
    let z: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let z = DMatrix::from_row_slice(n, d, &z);
    Ok(SampleMatrix(z * lt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_model_with_certain_edge() {
        let spec = RandomModelSpec::new(2, 1.0, 1);
        let m = generate_random_model(&spec, 9).unwrap();
        assert_eq!(m.edges().len(), 1);
        assert!((m.covariance()[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((m.covariance()[(1, 1)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_edge_probability_gives_identity() {
        for seed in 0..5 {
            let m = generate_random_model(&RandomModelSpec::new(6, 0.0, 3), seed).unwrap();
            assert!(m.edges().is_empty());
            assert_eq!(m.precision(), &DMatrix::identity(6, 6));
            assert_eq!(m.covariance(), &DMatrix::identity(6, 6));
            assert_eq!(m.theta_min(), f64::INFINITY);
        }
    }

    #[test]
    fn generation_rejects_bad_arguments() {
        assert!(generate_random_model(&RandomModelSpec::new(1, 0.1, 2), 0).is_err());
        let bad = RandomModelSpec::new(4, 0.1, 2).weights(1.0, -1.0);
        assert!(generate_random_model(&bad, 0).is_err());
        assert!(generate_random_model(&RandomModelSpec::new(4, 0.1, 0), 0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = RandomModelSpec::new(12, 0.3, 3);
        let a = generate_random_model(&spec, 77).unwrap();
        assert_eq!(a.seed(), Some(77));
        let b = generate_random_model(&spec, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn star_two_nodes_closed_form() {
        let m = generate_star_model(2, 0.25).unwrap();
        let f = 1.0 / (1.0 - 1.0 / 16.0);
        let expect = DMatrix::from_row_slice(2, 2, &[f, -0.25 * f, -0.25 * f, f]);
        assert!(linalg::max_abs_diff(m.precision(), &expect) < 1e-14);
        assert_eq!(m.covariance()[(0, 1)], 0.25);
    }

    #[test]
    fn star_precision_is_a_star() {
        let m = generate_star_model(5, 0.25).unwrap();
        let expected: BTreeSet<Edge> = (1..5).map(|l| (0, l)).collect();
        assert_eq!(m.edges(), &expected);
        let t = m.precision();
        for l in 2..5 {
            assert!((t[(0, l)] - t[(0, 1)]).abs() < 1e-14);
        }
        assert!((t[(0, 1)] + 0.25 / (1.0 - 0.0625)).abs() < 1e-12);
    }

    #[test]
    fn star_rejects_invalid_correlation() {
        assert!(generate_star_model(5, 1.0).is_err());
        assert!(generate_star_model(5, 0.0).is_err());
        assert!(generate_star_model(1, 0.25).is_err());
    }

    #[test]
    fn identity_constants_are_unity() {
        let c = compute_constants(&identity_model(5).unwrap()).unwrap();
        assert_eq!((c.alpha, c.kappa_sigma, c.kappa_gamma), (1.0, 1.0, 1.0));
        assert_eq!(c.incoherence_value, 0.0);
    }

    #[test]
    fn fully_connected_pair_has_empty_complement() {
        let m = generate_star_model(2, 0.4).unwrap();
        let c = compute_constants(&m).unwrap();
        assert_eq!(c.incoherence_value, 0.0);
        assert_eq!(c.alpha, 1.0);
    }

    #[test]
    fn constants_respect_cap() {
        let m = identity_model(5).unwrap();
        assert!(matches!(
            compute_constants_capped(&m, 4),
            Err(Error::DimensionTooLarge { d: 5, cap: 4 })
        ));
    }

    #[test]
    fn sample_shapes_and_determinism() {
        let m = generate_star_model(4, 0.3).unwrap();
        let one = m.sample(1, 5).unwrap();
        assert_eq!((one.n(), one.dim()), (1, 4));
        assert_eq!(m.sample(50, 5).unwrap(), m.sample(50, 5).unwrap());
        assert!(m.sample(0, 5).is_err());
    }
}
