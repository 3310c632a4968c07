//! ℓ1-regularized Gaussian maximum likelihood (graphical lasso).
//!
//! Minimizes `tr(ΘS) − log det Θ + λ Σ_{j≠k} |Θ_jk|` over positive-definite
//! `Θ` by block coordinate descent on the dual: each sweep visits every
//! column of the working covariance `W`, solves the column's lasso
//! subproblem by cyclic coordinate descent, and writes `w₁₂ = W₁₁β` back.
//! `Θ̂` is assembled from the final `W` and the lasso coefficients, so its
//! zero pattern comes from exact soft-thresholding rather than from an
//! inverse.
//!
//! The working covariance is kept positive definite throughout. Inputs that
//! are not PSD (the Signs and Uncoded estimates) can otherwise push a column
//! update outside the cone; such updates are pulled back toward the previous
//! column by halving.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CovarianceEstimate, Provenance};
use crate::linalg;
use crate::model::Edge;

/// Off-diagonal initialization of the working covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// `W = S` off the diagonal.
    #[default]
    Full,
    /// `W` diagonal.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_sweeps: usize,
    /// Stop once the mean absolute change of the off-diagonal of `W` in a
    /// sweep falls below `duality_tol · mean |S_jk|`.
    pub duality_tol: f64,
    /// Coordinate-descent tolerance on the lasso coefficients.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// `|Θ̂_jk|` must exceed this for an edge to be declared.
    pub edge_threshold: f64,
    /// Also penalize the diagonal (`W_jj = S_jj + λ`). Off by default: the
    /// objective penalizes off-diagonal entries only.
    pub penalize_diagonal: bool,
    pub warm_start: WarmStart,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.1,
            max_sweeps: 200,
            duality_tol: 1e-5,
            inner_tol: 1e-7,
            max_inner_iters: 10_000,
            edge_threshold: 1e-8,
            penalize_diagonal: false,
            warm_start: WarmStart::Full,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be ≥ 0, got {}",
                self.lambda
            )));
        }
        if self.max_sweeps == 0 || self.max_inner_iters == 0 {
            return Err(Error::invalid(
                "sweep and iteration limits must be positive",
            ));
        }
        if !(self.duality_tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.edge_threshold >= 0.0) {
            return Err(Error::invalid("edge_threshold must be ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub theta_hat: DMatrix<f64>,
    /// Final working covariance `W ≈ Θ̂⁻¹`.
    pub sigma_hat: DMatrix<f64>,
    pub edges: BTreeSet<Edge>,
    /// Penalized objective after each sweep.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub sweeps_used: usize,
    /// Column updates that had to be shortened to keep `W` positive definite.
    pub pd_repairs: usize,
}

impl SolverResult {
    /// Sign of `Θ̂_jk` on declared edges, 0 elsewhere.
    pub fn edge_sign(&self, j: usize, k: usize) -> i8 {
        let key = if j < k { (j, k) } else { (k, j) };
        if !self.edges.contains(&key) {
            return 0;
        }
        if self.theta_hat[(j, k)] > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// `tr(ΘS) − log det Θ + λ Σ_{j≠k} |Θ_jk|`.
pub fn objective(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    penalized_objective(theta, s, lambda, false)
}

/// [`objective`], optionally charging the diagonal as well.
pub fn penalized_objective(
    theta: &DMatrix<f64>,
    s: &DMatrix<f64>,
    lambda: f64,
    penalize_diagonal: bool,
) -> Result<f64> {
    if theta.shape() != s.shape() || !theta.is_square() {
        return Err(Error::DimensionMismatch {
            expected: s.nrows(),
            found: theta.nrows(),
        });
    }
    let logdet = linalg::logdet_spd(theta)
        .ok_or_else(|| Error::NotPositiveDefinite("objective argument Θ".into()))?;
    let trace = theta.component_mul(s).sum();
    let d = theta.nrows();
    let mut l1 = 0.0;
    for j in 0..d {
        for k in 0..d {
            if j != k || penalize_diagonal {
                l1 += theta[(j, k)].abs();
            }
        }
    }
    Ok(trace - logdet + lambda * l1)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for `min ½βᵀAβ − bᵀβ + λ‖β‖₁`, warm-started
/// from `beta`.
fn lasso_cd(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    cfg: &SolverConfig,
) {
    let m = b.len();
    let mut resid = b - a * &*beta;
    for _ in 0..cfg.max_inner_iters {
        let mut max_change = 0.0_f64;
        for k in 0..m {
            let akk = a[(k, k)];
            let old = beta[k];
            let z = resid[k] + akk * old;
            let new = soft_threshold(z, lambda) / akk;
            let delta = new - old;
            if delta != 0.0 {
                beta[k] = new;
                resid.axpy(-delta, &a.column(k), 1.0);
                max_change = max_change.max(delta.abs() * akk.sqrt());
            }
        }
        if max_change < cfg.inner_tol {
            return;
        }
    }
}

fn others(d: usize, j: usize) -> Vec<usize> {
    (0..d).filter(|&k| k != j).collect()
}

struct Workspace {
    w: DMatrix<f64>,
    betas: Vec<DVector<f64>>,
}

impl Workspace {
    /// `Θ` from the lasso coefficients: `θ_jj = 1/(W_jj − w₁₂ᵀβ)`,
    /// `θ₁₂ = −β θ_jj`, then symmetrized.
    fn theta(&self) -> DMatrix<f64> {
        let d = self.w.nrows();
        let mut theta = DMatrix::zeros(d, d);
        for j in 0..d {
            let idx = others(d, j);
            let beta = &self.betas[j];
            let w12_beta: f64 = idx
                .iter()
                .zip(beta.iter())
                .map(|(&k, b)| self.w[(k, j)] * b)
                .sum();
            let tjj = 1.0 / (self.w[(j, j)] - w12_beta);
            theta[(j, j)] = tjj;
            for (pos, &k) in idx.iter().enumerate() {
                theta[(k, j)] = -beta[pos] * tjj;
            }
        }
        linalg::symmetrize(&theta)
    }
}

/// Solve the ℓ1-regularized log-determinant program for `s`.
///
/// Non-convergence within `max_sweeps` is not an error: the result carries
/// `converged = false`. An input with no positive definite optimum at this
/// `λ` is reported as [`Error::NotPositiveDefinite`].
pub fn glasso_solve(s: &CovarianceEstimate, cfg: &SolverConfig) -> Result<SolverResult> {
    glasso_solve_matrix(s.matrix(), cfg)
}

/// [`glasso_solve`] on a bare symmetric matrix.
pub fn glasso_solve_matrix(s: &DMatrix<f64>, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let d = s.nrows();
    if d == 0 || !s.is_square() {
        return Err(Error::invalid("input must be a non-empty square matrix"));
    }
    if !linalg::is_symmetric(s, 1e-12) {
        return Err(Error::invalid("input covariance is not symmetric"));
    }
    if let Some(j) = (0..d).find(|&j| !(s[(j, j)] > 0.0)) {
        return Err(Error::invalid(format!(
            "diagonal entry ({j},{j}) = {} is not positive",
            s[(j, j)]
        )));
    }
    let lambda = cfg.lambda;
    let diag_shift = if cfg.penalize_diagonal { lambda } else { 0.0 };

    let mut w = match cfg.warm_start {
        WarmStart::Full => s.clone(),
        WarmStart::Diagonal => DMatrix::from_diagonal(&s.diagonal()),
    };
    for j in 0..d {
        w[(j, j)] = s[(j, j)] + diag_shift;
    }
    let mut pd_repairs = 0;
    if !linalg::is_positive_definite(&w) {
        // Pull the off-diagonal toward zero until the start is feasible.
        let diag = DMatrix::from_diagonal(&w.diagonal());
        let off = &w - &diag;
        let mut t = 1.0;
        loop {
            t *= 0.5;
            pd_repairs += 1;
            let cand = &diag + &off * t;
            if linalg::is_positive_definite(&cand) {
                w = cand;
                break;
            }
        }
        log::debug!("glasso: initial W not positive definite, off-diagonal scaled by {t}");
    }

    let mut ws = Workspace {
        w,
        betas: vec![DVector::zeros(d.saturating_sub(1)); d],
    };
    let off_count = (d * (d - 1)) as f64;
    let mean_abs_s = if d > 1 {
        (0..d)
            .flat_map(|j| (0..d).filter(move |&k| k != j).map(move |k| (j, k)))
            .map(|(j, k)| s[(j, k)].abs())
            .sum::<f64>()
            / off_count
    } else {
        0.0
    };
    let stop = cfg.duality_tol * if mean_abs_s > 0.0 { mean_abs_s } else { 1.0 };

    let mut trace = Vec::new();
    let mut converged = d == 1;
    let mut sweeps = 0;
    if d == 1 {
        trace.push(penalized_objective(
            &ws.theta(),
            s,
            lambda,
            cfg.penalize_diagonal,
        )?);
    }
    while !converged && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut change = 0.0;
        for j in 0..d {
            let idx = others(d, j);
            let w11 = ws.w.select_rows(&idx).select_columns(&idx);
            let s12 = DVector::from_iterator(d - 1, idx.iter().map(|&k| s[(k, j)]));
            let old12 = DVector::from_iterator(d - 1, idx.iter().map(|&k| ws.w[(k, j)]));
            let mut beta = ws.betas[j].clone();
            lasso_cd(&w11, &s12, lambda, &mut beta, cfg);
            let mut w12 = &w11 * &beta;
            let wjj = ws.w[(j, j)];
            if !(wjj - w12.dot(&beta) > 0.0) {
                let (nw, nb) = pull_back(&w11, &old12, &w12, wjj)?;
                w12 = nw;
                beta = nb;
                pd_repairs += 1;
            }
            for (pos, &k) in idx.iter().enumerate() {
                change += (w12[pos] - ws.w[(k, j)]).abs();
                ws.w[(k, j)] = w12[pos];
                ws.w[(j, k)] = w12[pos];
            }
            ws.betas[j] = beta;
        }
        let theta = ws.theta();
        let obj = penalized_objective(&theta, s, lambda, cfg.penalize_diagonal).unwrap_or(f64::NAN);
        trace.push(obj);
        // One write per ordered off-diagonal entry per sweep.
        if change / off_count < stop {
            converged = true;
        }
    }
    if pd_repairs > 0 {
        log::debug!("glasso: {pd_repairs} positive-definiteness repairs");
    }

    let mut theta = ws.theta();
    if !linalg::is_positive_definite(&theta) {
        // Indefinite inputs with small λ leave the dual without a positive
        // definite point, so the primal is unbounded below.
        return Err(Error::NotPositiveDefinite(format!(
            "no positive definite optimum at λ = {lambda}; the input is too far from PSD for this λ"
        )));
    }
    let mut edges = BTreeSet::new();
    for j in 0..d {
        for k in (j + 1)..d {
            let in_lasso = ws.betas[j][k - 1] != 0.0 || ws.betas[k][j] != 0.0;
            if in_lasso && theta[(j, k)].abs() > cfg.edge_threshold {
                edges.insert((j, k));
            } else {
                theta[(j, k)] = 0.0;
                theta[(k, j)] = 0.0;
            }
        }
    }
    Ok(SolverResult {
        theta_hat: theta,
        sigma_hat: ws.w,
        edges,
        objective_trace: trace,
        converged,
        sweeps_used: sweeps,
        pd_repairs,
    })
}

/// Shorten a column update so that `W` stays positive definite: blend
/// `w₁₂` toward the previous column until the Schur complement
/// `W_jj − w₁₂ᵀ W₁₁⁻¹ w₁₂` is positive again, and return the blended column
/// with its consistent coefficients `β = W₁₁⁻¹ w₁₂`.
fn pull_back(
    w11: &DMatrix<f64>,
    old: &DVector<f64>,
    new: &DVector<f64>,
    wjj: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let chol = w11
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("glasso working covariance block".into()))?;
    let mut t = 1.0;
    for _ in 0..60 {
        t *= 0.5;
        let cand = old + (new - old) * t;
        let beta = chol.solve(&cand);
        if wjj - cand.dot(&beta) > 0.0 {
            return Ok((cand, beta));
        }
    }
    let beta = chol.solve(old);
    Ok((old.clone(), beta))
}

/// Largest violations of the subgradient optimality conditions at `Θ̂`,
/// measured with `Σ = Θ̂⁻¹`: `(edge residual, non-edge excess, diagonal
/// residual)`.
///
/// For an edge the residual is `|S_jk − Σ_jk + λ sign(Θ̂_jk)|`; for a
/// non-edge the excess is `max(|S_jk − Σ_jk| − λ, 0)`.
pub fn kkt_residuals(
    s: &DMatrix<f64>,
    result: &SolverResult,
    cfg: &SolverConfig,
) -> Result<(f64, f64, f64)> {
    let sigma = linalg::inverse_spd(&result.theta_hat)
        .ok_or_else(|| Error::NotPositiveDefinite("Θ̂".into()))?;
    let d = s.nrows();
    let lambda = cfg.lambda;
    let (mut edge, mut non_edge, mut diag) = (0.0_f64, 0.0_f64, 0.0_f64);
    for j in 0..d {
        let shift = if cfg.penalize_diagonal { lambda } else { 0.0 };
        diag = diag.max((s[(j, j)] - sigma[(j, j)] + shift).abs());
        for k in (j + 1)..d {
            let g = s[(j, k)] - sigma[(j, k)];
            if result.edges.contains(&(j, k)) {
                let sign = result.theta_hat[(j, k)].signum();
                edge = edge.max((g + lambda * sign).abs());
            } else {
                non_edge = non_edge.max(g.abs() - lambda);
            }
        }
    }
    Ok((edge, non_edge.max(0.0), diag))
}

/// `λ = (8π/α) √(ln(2/ε) / (2n))`, the regularization level under which the
/// sign-consistency guarantees hold.
pub fn theoretical_lambda(alpha: f64, n: usize, epsilon: f64) -> f64 {
    (8.0 * PI / alpha) * ((2.0 / epsilon).ln() / (2.0 * n as f64)).sqrt()
}

/// Channel-aware variant for the Uncoded estimate:
/// `λ = (8/α) √(2c · ln(8/ε) / n)`, obtained by inverting the Uncoded
/// per-entry tail bound instead of the Signs one.
pub fn channel_aware_lambda(alpha: f64, n: usize, epsilon: f64, c: f64) -> f64 {
    (8.0 / alpha) * (2.0 * c * (8.0 / epsilon).ln() / n as f64).sqrt()
}

/// Reasons the theoretical λ is being used outside the guarantee's regime.
pub fn lambda_regime_warnings(alpha: f64, epsilon: f64, d: usize) -> Vec<String> {
    let mut w = Vec::new();
    if !(alpha > 0.0 && alpha <= 1.0) {
        w.push(format!("alpha = {alpha} outside (0, 1]"));
    }
    let cap = 1.0 / (d as f64 * d as f64);
    if !(epsilon > 0.0 && epsilon <= cap) {
        w.push(format!("epsilon = {epsilon} outside (0, d⁻² = {cap}]"));
    }
    w
}

/// Scale a λ tuned on original data to the Signs (×4) or Uncoded (×2/3)
/// estimate.
pub fn heuristic_lambda(base: f64, method: Provenance) -> f64 {
    match method {
        Provenance::Original => base,
        Provenance::Signs => 4.0 * base,
        Provenance::Uncoded => base * 2.0 / 3.0,
    }
}
