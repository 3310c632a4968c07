//! Covariance estimates formed at the central machine.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{RealBlockChannel, ReceivedMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::SampleMatrix;

/// Floor applied to de-noised diagonal entries of the Uncoded estimate.
pub const DIAG_FLOOR: f64 = 1e-3;

/// Multiplier in the Uncoded per-entry tail constant.
pub const UNCODED_TAIL_BASE: f64 = 3200.0;

/// Which data a covariance estimate was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Signs,
    Uncoded,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Signs => "signs",
            Provenance::Uncoded => "uncoded",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Provenance::Original),
            "signs" => Ok(Provenance::Signs),
            "uncoded" => Ok(Provenance::Uncoded),
            other => Err(Error::invalid(format!("unknown provenance '{other}'"))),
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Symmetric `d × d` covariance estimate. Not necessarily positive
/// semi-definite. [`CovarianceEstimate::new`] requires a strictly positive
/// diagonal; only [`sample_covariance`] may yield zeros there, for variables
/// that were zero in every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    provenance: Provenance,
    n_used: usize,
    diag_clamps: usize,
}

impl CovarianceEstimate {
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance, n_used: usize) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid(
                "covariance estimate must be a non-empty square matrix",
            ));
        }
        if !linalg::is_symmetric(&matrix, 1e-12) {
            return Err(Error::invalid("covariance estimate is not symmetric"));
        }
        if let Some(j) = (0..matrix.nrows()).find(|&j| !(matrix[(j, j)] > 0.0)) {
            return Err(Error::invalid(format!(
                "diagonal entry ({j},{j}) = {} is not positive",
                matrix[(j, j)]
            )));
        }
        if provenance == Provenance::Signs {
            let unit_diag = (0..matrix.nrows()).all(|j| matrix[(j, j)] == 1.0);
            if !unit_diag || matrix.iter().any(|v| v.abs() > 1.0) {
                return Err(Error::invalid(
                    "signs estimate must have unit diagonal and |entries| ≤ 1",
                ));
            }
        }
        Ok(CovarianceEstimate {
            matrix,
            provenance,
            n_used,
            diag_clamps: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_used(&self) -> usize {
        self.n_used
    }

    /// Number of diagonal entries raised to [`DIAG_FLOOR`].
    pub fn diag_clamps(&self) -> usize {
        self.diag_clamps
    }
}

/// `S = (1/n) Σ x xᵀ`, no centering.
pub fn sample_covariance(samples: &SampleMatrix) -> Result<CovarianceEstimate> {
    let n = samples.n();
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let x = samples.as_matrix();
    let s = linalg::symmetrize(&(x.transpose() * x / n as f64));
    // A Gram matrix is PSD, so a zero diagonal entry only means a variable
    // that was identically zero in every sample.
    Ok(CovarianceEstimate {
        matrix: s,
        provenance: Provenance::Original,
        n_used: n,
        diag_clamps: 0,
    })
}

/// `n × d` matrix of ±1 signs, stored per machine as packed bits
/// (bit set ⇔ +1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    n: usize,
    d: usize,
    words_per_col: usize,
    bits: Vec<u64>,
}

impl SignMatrix {
    fn zeroed(n: usize, d: usize) -> Self {
        let words_per_col = n.div_ceil(64);
        SignMatrix {
            n,
            d,
            words_per_col,
            bits: vec![0; words_per_col * d],
        }
    }

    fn set_positive(&mut self, i: usize, j: usize) {
        self.bits[j * self.words_per_col + i / 64] |= 1u64 << (i % 64);
    }

    /// Build from row-major ±1 entries.
    pub fn from_rows(n: usize, d: usize, signs: &[i8]) -> Result<Self> {
        if signs.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: signs.len(),
            });
        }
        let mut m = Self::zeroed(n, d);
        for i in 0..n {
            for j in 0..d {
                match signs[i * d + j] {
                    1 => m.set_positive(i, j),
                    -1 => {}
                    v => return Err(Error::invalid(format!("sign entry {v} is not ±1"))),
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        if self.bits[j * self.words_per_col + i / 64] >> (i % 64) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Machine `j`'s signs.
    pub fn column(&self, j: usize) -> Vec<i8> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    fn packed(&self, j: usize) -> &[u64] {
        &self.bits[j * self.words_per_col..(j + 1) * self.words_per_col]
    }

    /// Number of samples on which machines `j` and `k` agree.
    pub fn agreements(&self, j: usize, k: usize) -> usize {
        // Padding bits are zero in every column, so they never disagree.
        let disagree: u32 = self
            .packed(j)
            .iter()
            .zip(self.packed(k))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        self.n - disagree as usize
    }

    /// Permute machines: column `j` of the result is column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (j, &src) in perm.iter().enumerate() {
            let w = self.words_per_col;
            out.bits[j * w..(j + 1) * w].copy_from_slice(self.packed(src));
        }
        out
    }
}

/// Entrywise sign; exact zeros map to +1.
pub fn sign_quantize(samples: &SampleMatrix) -> SignMatrix {
    let x = samples.as_matrix();
    let (n, d) = x.shape();
    let mut m = SignMatrix::zeroed(n, d);
    for j in 0..d {
        for i in 0..n {
            if x[(i, j)] >= 0.0 {
                m.set_positive(i, j);
            }
        }
    }
    m
}

/// Fraction of samples on which the two sign sequences agree.
pub fn estimate_beta(bits_j: &[i8], bits_k: &[i8]) -> Result<f64> {
    if bits_j.len() != bits_k.len() {
        return Err(Error::DimensionMismatch {
            expected: bits_j.len(),
            found: bits_k.len(),
        });
    }
    if bits_j.is_empty() {
        return Err(Error::invalid("need at least one sample"));
    }
    let agree = bits_j
        .iter()
        .zip(bits_k)
        .filter(|(a, b)| *a * *b == 1)
        .count();
    Ok(agree as f64 / bits_j.len() as f64)
}

/// Correlation implied by a sign-agreement probability: `−cos(π β)`.
pub fn correlation_from_beta(beta: f64) -> f64 {
    -(PI * beta).cos()
}

/// Sign-agreement probability of two unit-variance jointly Gaussian
/// variables with correlation `rho`: `1/2 + arcsin(ρ)/π`.
pub fn beta_from_correlation(rho: f64) -> f64 {
    0.5 + rho.asin() / PI
}

/// `Ŝ_jk = −cos(π β̂_jk)` for every pair; the diagonal is exactly one.
pub fn signs_covariance(bits: &SignMatrix) -> Result<CovarianceEstimate> {
    let (n, d) = (bits.n(), bits.dim());
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut s = DMatrix::identity(d, d);
    for j in 0..d {
        for k in (j + 1)..d {
            let beta = bits.agreements(j, k) as f64 / n as f64;
            let rho = correlation_from_beta(beta).clamp(-1.0, 1.0);
            s[(j, k)] = rho;
            s[(k, j)] = rho;
        }
    }
    CovarianceEstimate::new(s, Provenance::Signs, n)
}

/// De-mix and de-bias received symbols.
///
/// `S_x̃ = H̃⁻¹ S_ỹ H̃⁻ᵀ − σ² H̃⁻¹ H̃⁻ᵀ`, and the estimate is the average of its
/// two diagonal `d × d` blocks, symmetrized. Diagonal entries that fall
/// below [`DIAG_FLOOR`] are raised to it.
pub fn uncoded_covariance(
    received: &ReceivedMatrix,
    chan: &RealBlockChannel,
) -> Result<CovarianceEstimate> {
    let d = chan.dim();
    let y = received.as_matrix();
    if y.ncols() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            found: y.ncols(),
        });
    }
    let uses = y.nrows();
    if uses == 0 {
        return Err(Error::invalid("need at least one received vector"));
    }
    let s_y = y.transpose() * y / uses as f64;
    let a = chan.h_tilde_inv();
    let at = a.transpose();
    let mut s_x = a * s_y * &at;
    if chan.noise_var() > 0.0 {
        s_x -= a * &at * chan.noise_var();
    }
    let blocks = (s_x.view((0, 0), (d, d)) + s_x.view((d, d), (d, d))) * 0.5;
    let mut s = linalg::symmetrize(&blocks.into_owned());
    let mut clamps = 0;
    for j in 0..d {
        if !(s[(j, j)] >= DIAG_FLOOR) {
            s[(j, j)] = DIAG_FLOOR;
            clamps += 1;
        }
    }
    if clamps > 0 {
        log::debug!("uncoded estimate: {clamps} diagonal entries clamped to {DIAG_FLOOR}");
    }
    let mut est = CovarianceEstimate::new(s, Provenance::Uncoded, 2 * uses)?;
    est.diag_clamps = clamps;
    Ok(est)
}

/// `c = 3200 (1 + σ_z² / λ_min(H̃)²)²`, the constant in the per-entry tail
/// bound of the de-mixed sample covariance.
pub fn uncoded_tail_constant(chan: &RealBlockChannel) -> f64 {
    let ratio = chan.noise_var() / (chan.lambda_min() * chan.lambda_min());
    UNCODED_TAIL_BASE * (1.0 + ratio).powi(2)
}

/// `2 exp(−2nδ²/π²)`: tail bound on `|ρ̂ − ρ| ≥ δ` for the signs estimator.
pub fn signs_tail_bound(n: usize, delta: f64) -> f64 {
    2.0 * (-2.0 * n as f64 * delta * delta / (PI * PI)).exp()
}

/// `8 exp(−nδ²/(2c))`: tail bound on one entry of the Uncoded estimate.
pub fn uncoded_tail_bound(n: usize, delta: f64, c: f64) -> f64 {
    8.0 * (-(n as f64) * delta * delta / (2.0 * c)).exp()
}
