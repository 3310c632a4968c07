//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, SymmetricEigen};

/// Max-row-sum norm `max_i Σ_j |X_ij|`.
pub fn max_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `log det` of a symmetric positive-definite matrix, `None` if the
/// Cholesky factorization fails.
pub fn logdet_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    Some(2.0 * (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

pub fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().cholesky()?.inverse();
    Some(symmetrize(&inv))
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

/// 2-norm condition number of a symmetric matrix.
pub fn sym_condition(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    let (lo, hi) = (ev[0].abs(), ev[ev.len() - 1].abs());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
