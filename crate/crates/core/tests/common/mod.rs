//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};

/// `−ln det Θ + tr(SΘ) + λ Σ_{j≠k} |Θ_jk|`, or `None` when `Θ` is not PD.
pub fn primal_objective(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64) -> Option<f64> {
    let chol = theta.clone().cholesky()?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let d = theta.nrows();
    let mut tr = 0.0;
    let mut l1 = 0.0;
    for j in 0..d {
        for k in 0..d {
            tr += s[(j, k)] * theta[(k, j)];
            if j != k {
                l1 += theta[(j, k)].abs();
            }
        }
    }
    Some(-logdet + tr + lambda * l1)
}

fn smooth(theta: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<f64> {
    primal_objective(theta, s, 0.0)
}

/// Proximal gradient descent on the primal with backtracking, iterated far
/// past any practical tolerance. Returns `(Θ, objective)`.
pub fn ista_glasso(s: &DMatrix<f64>, lambda: f64) -> (DMatrix<f64>, f64) {
    let d = s.nrows();
    let mut theta = DMatrix::from_fn(d, d, |j, k| if j == k { 1.0 / s[(j, j)] } else { 0.0 });
    let mut t = 1.0;
    for _ in 0..200_000 {
        let inv = theta.clone().try_inverse().expect("iterate stays PD");
        let grad = s - &inv;
        let f0 = smooth(&theta, s).unwrap();
        let next = loop {
            let mut cand = &theta - &grad * t;
            for j in 0..d {
                for k in 0..d {
                    if j != k {
                        let v = cand[(j, k)];
                        cand[(j, k)] = v.signum() * (v.abs() - t * lambda).max(0.0);
                    }
                }
            }
            cand = (&cand + cand.transpose()) * 0.5;
            let delta = &cand - &theta;
            let model = f0 + grad.dot(&delta) + delta.norm_squared() / (2.0 * t);
            match smooth(&cand, s) {
                Some(f) if f <= model + 1e-15 => break cand,
                _ => t *= 0.5,
            }
        };
        let step = (&next - &theta).norm();
        theta = next;
        t = (t * 1.5).min(10.0);
        if step < 1e-14 {
            break;
        }
    }
    let obj = primal_objective(&theta, s, lambda).unwrap();
    (theta, obj)
}

/// `lg det(snr · H_Sᴴ H_S + I)` through the real embedding
/// `[[A, −B], [B, A]]` of the Hermitian matrix `A + iB`, whose determinant
/// is `|det|²`.
pub fn subset_capacity_bits(h: &DMatrix<Complex<f64>>, snr: f64, subset: &[usize]) -> f64 {
    let k = subset.len();
    let hs = DMatrix::from_fn(h.nrows(), k, |i, c| h[(i, subset[c])]);
    let g = hs.adjoint() * &hs * Complex::new(snr, 0.0) + DMatrix::identity(k, k);
    let real = DMatrix::from_fn(2 * k, 2 * k, |i, j| {
        let (bi, bj) = (i / k, j / k);
        let z = g[(i % k, j % k)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    });
    0.5 * real.determinant().log2()
}

/// Brute-force minimum over nonempty subsets of `capacity − Σ rates`.
pub fn min_rate_slack(h: &DMatrix<Complex<f64>>, snr: f64, rates: &[f64]) -> f64 {
    let d = h.ncols();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << d) {
        let subset: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        let cap = subset_capacity_bits(h, snr, &subset);
        let used: f64 = subset.iter().map(|&j| rates[j]).sum();
        best = best.min(cap - used);
    }
    best
}

/// Incoherence value by explicit Kronecker product and dense inverse.
pub fn incoherence_brute(q: &DMatrix<f64>, theta: &DMatrix<f64>) -> (f64, f64) {
    let d = q.nrows();
    let gamma = q.kronecker(q);
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|j| (0..d).map(move |k| (j, k))).collect();
    let (sup, comp): (Vec<usize>, Vec<usize>) = (0..d * d).partition(|&i| theta[pairs[i]] != 0.0);
    let gss = DMatrix::from_fn(sup.len(), sup.len(), |a, b| gamma[(sup[a], sup[b])]);
    let gss_inv = gss.try_inverse().expect("Γ_SS invertible");
    let kappa_gamma = row_sum_norm(&gss_inv);
    if comp.is_empty() {
        return (0.0, kappa_gamma);
    }
    let gcs = DMatrix::from_fn(comp.len(), sup.len(), |a, b| gamma[(comp[a], sup[b])]);
    (row_sum_norm(&(gcs * gss_inv)), kappa_gamma)
}

pub fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// A random SPD matrix from a seeded linear congruential stream, independent
/// of the crate's RNG plumbing.
pub fn lcg_spd(d: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let a = DMatrix::from_fn(d, d + 2, |_, _| next());
    let m = &a * a.transpose() / (d + 2) as f64 + DMatrix::identity(d, d) * 0.05;
    (&m + m.transpose()) * 0.5
}
