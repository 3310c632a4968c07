//! SIMO Gaussian multiple-access channel.
//!
//! Every machine has one transmit antenna; the receiver has `d` antennas.
//! The Signs scheme only needs the rate region (it assumes an ideal code);
//! the Uncoded scheme pushes raw samples through `ỹ = H̃ x̃ + z̃`.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SignMatrix;
use crate::model::SampleMatrix;
use crate::seeds;

pub type C64 = Complex<f64>;

/// Largest `d` for which every subset constraint of the rate region is
/// checked. Above this only singletons and the full set are checked.
pub const EXHAUSTIVE_MAX_D: usize = 20;

/// Slack (bits) tolerated on a rate constraint, for rounding in `lg det`.
pub const RATE_TOL: f64 = 1e-12;

/// How random gains are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Real entries, i.i.d. `N(0, 1)`.
    #[default]
    RealNormal,
    /// Circularly-symmetric complex entries; real and imaginary parts
    /// i.i.d. `N(0, 1/2)`.
    ComplexNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    gains: DMatrix<C64>,
    power: f64,
    noise_var: f64,
}

impl ChannelSpec {
    /// `gains` must be square and invertible; `noise_var` is the variance of
    /// each real noise component.
    pub fn new(gains: DMatrix<C64>, power: f64, noise_var: f64) -> Result<Self> {
        if !gains.is_square() || gains.nrows() == 0 {
            return Err(Error::invalid(format!(
                "gain matrix must be square (receive antennas = transmitters), got {}x{}",
                gains.nrows(),
                gains.ncols()
            )));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::invalid(format!(
                "power must be positive, got {power}"
            )));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be ≥ 0, got {noise_var}"
            )));
        }
        let sv = gains.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::Singular {
                what: "channel gain matrix",
                condition: smax / smin,
            });
        }
        Ok(ChannelSpec {
            gains,
            power,
            noise_var,
        })
    }

    pub fn identity(d: usize, power: f64, noise_var: f64) -> Result<Self> {
        Self::new(DMatrix::identity(d, d), power, noise_var)
    }

    /// `p = snr`, `σ_z² = 1`.
    pub fn from_snr(gains: DMatrix<C64>, snr: f64) -> Result<Self> {
        Self::new(gains, snr, 1.0)
    }

    pub fn real(gains: &DMatrix<f64>, power: f64, noise_var: f64) -> Result<Self> {
        Self::new(gains.map(|v| C64::new(v, 0.0)), power, noise_var)
    }

    /// Random fading gains. Singular draws (probability zero) are an error.
    pub fn rayleigh(
        d: usize,
        fading: FadingModel,
        power: f64,
        noise_var: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(fading_gains(d, fading, seed), power, noise_var)
    }

    pub fn dim(&self) -> usize {
        self.gains.ncols()
    }

    pub fn gains(&self) -> &DMatrix<C64> {
        &self.gains
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }
}

pub fn fading_gains(d: usize, fading: FadingModel, seed: u64) -> DMatrix<C64> {
    let mut rng = seeds::rng(seed);
    let entries: Vec<C64> = (0..d * d)
        .map(|_| match fading {
            FadingModel::RealNormal => C64::new(rng.sample(StandardNormal), 0.0),
            FadingModel::ComplexNormal => {
                let half = Normal::new(0.0, 0.5_f64.sqrt()).unwrap();
                C64::new(half.sample(&mut rng), half.sample(&mut rng))
            }
        })
        .collect();
    DMatrix::from_row_slice(d, d, &entries)
}

/// Whether the rate region was checked over every subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Exhaustive,
    /// Singletons and the full set only.
    Partial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRegionReport {
    pub feasible: bool,
    pub mode: CheckMode,
    /// Subset (0-based transmitter indices) with the smallest slack.
    pub tightest_subset: Vec<usize>,
    /// `capacity(S) − Σ_{k∈S} R_k` for the tightest subset, in bits.
    pub tightest_slack: f64,
    pub subsets_checked: usize,
}

/// Check `Σ_{k∈S} R_k ≤ lg det((p/σ²) H_Sᴴ H_S + I)` over subsets `S` of the
/// transmitters, where `H_S` keeps the columns in `S`.
pub fn rate_region_feasible(spec: &ChannelSpec, rates: &[f64]) -> Result<RateRegionReport> {
    let d = spec.dim();
    if rates.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rates.len(),
        });
    }
    if rates.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::invalid("rates must be nonnegative"));
    }
    if spec.noise_var == 0.0 {
        return Err(Error::Unconstrained);
    }
    let snr = spec.power / spec.noise_var;
    // G = snr·HᴴH + I; H_Sᴴ H_S is the principal S-submatrix of HᴴH.
    let h = &spec.gains;
    let mut gram = h.adjoint() * h * C64::new(snr, 0.0);
    for i in 0..d {
        gram[(i, i)] += C64::new(1.0, 0.0);
    }

    let mut tracker = Tightest::default();
    let mode = if d <= EXHAUSTIVE_MAX_D {
        let mut search = SubsetSearch {
            gram: &gram,
            rates,
            rows: Vec::with_capacity(d),
            members: Vec::with_capacity(d),
            tracker: &mut tracker,
        };
        search.extend(0, 0.0, 0.0);
        CheckMode::Exhaustive
    } else {
        for (k, &r) in rates.iter().enumerate() {
            tracker.offer(&[k], capacity_bits(&gram, &[k]), r);
        }
        let all: Vec<usize> = (0..d).collect();
        tracker.offer(&all, capacity_bits(&gram, &all), rates.iter().sum());
        CheckMode::Partial
    };
    Ok(RateRegionReport {
        feasible: tracker.slack >= -RATE_TOL,
        mode,
        tightest_subset: tracker.subset,
        tightest_slack: tracker.slack,
        subsets_checked: tracker.count,
    })
}

/// `lg det(G_SS)` for a Hermitian positive-definite `G`.
pub fn capacity_bits(gram: &DMatrix<C64>, subset: &[usize]) -> f64 {
    let k = subset.len();
    let sub = DMatrix::from_fn(k, k, |a, b| gram[(subset[a], subset[b])]);
    match sub.cholesky() {
        Some(ch) => {
            let l = ch.l_dirty();
            2.0 * (0..k).map(|i| l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2
        }
        None => f64::NEG_INFINITY,
    }
}

struct Tightest {
    subset: Vec<usize>,
    slack: f64,
    count: usize,
}

impl Default for Tightest {
    fn default() -> Self {
        Tightest {
            subset: Vec::new(),
            slack: f64::INFINITY,
            count: 0,
        }
    }
}

impl Tightest {
    fn offer(&mut self, subset: &[usize], capacity: f64, rate: f64) {
        self.count += 1;
        let slack = capacity - rate;
        if slack < self.slack {
            self.slack = slack;
            self.subset = subset.to_vec();
        }
    }
}

/// Depth-first enumeration of subsets in increasing index order, growing a
/// Cholesky factor of `G_SS` by one row per level so each subset costs
/// `O(|S|²)`.
struct SubsetSearch<'a> {
    gram: &'a DMatrix<C64>,
    rates: &'a [f64],
    /// Row `i` of the lower Cholesky factor, length `i + 1`.
    rows: Vec<Vec<C64>>,
    members: Vec<usize>,
    tracker: &'a mut Tightest,
}

impl SubsetSearch<'_> {
    fn extend(&mut self, start: usize, log_det: f64, rate: f64) {
        let d = self.gram.nrows();
        for next in start..d {
            let k = self.members.len();
            let mut row = Vec::with_capacity(k + 1);
            for i in 0..k {
                // G = L Lᴴ  ⇒  L_ki = (G_ki − Σ_{t<i} L_kt·conj(L_it)) / L_ii
                let mut acc = self.gram[(next, self.members[i])];
                for (t, li) in self.rows[i][..i].iter().enumerate() {
                    acc -= row[t] * li.conj();
                }
                row.push(acc / self.rows[i][i]);
            }
            let norm2: f64 = row.iter().map(|v: &C64| v.norm_sqr()).sum();
            let pivot = self.gram[(next, next)].re - norm2;
            if pivot <= 0.0 {
                // Numerically singular; cannot happen for G = snr·HᴴH + I.
                continue;
            }
            row.push(C64::new(pivot.sqrt(), 0.0));
            let log_det = log_det + pivot.ln();
            let rate = rate + self.rates[next];
            self.members.push(next);
            self.rows.push(row);
            self.tracker
                .offer(&self.members, log_det / std::f64::consts::LN_2, rate);
            self.extend(next + 1, log_det, rate);
            self.rows.pop();
            self.members.pop();
        }
    }
}

/// Real block form of the channel with the `√(p/2)` input scaling folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct RealBlockChannel {
    h_tilde: DMatrix<f64>,
    h_tilde_inv: DMatrix<f64>,
    lambda_min: f64,
    noise_var: f64,
}

impl RealBlockChannel {
    pub fn dim(&self) -> usize {
        self.h_tilde.nrows() / 2
    }

    pub fn h_tilde(&self) -> &DMatrix<f64> {
        &self.h_tilde
    }

    pub fn h_tilde_inv(&self) -> &DMatrix<f64> {
        &self.h_tilde_inv
    }

    /// Smallest singular value of `H̃`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

/// `H̃ = √(p/2)·[[H_R, −H_I], [H_I, H_R]]`.
pub fn build_real_block(spec: &ChannelSpec) -> Result<RealBlockChannel> {
    let d = spec.dim();
    let scale = (spec.power / 2.0).sqrt();
    let h = &spec.gains;
    let h_tilde = DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let (bi, i) = (r / d, r % d);
        let (bj, j) = (c / d, c % d);
        let g = h[(i, j)];
        scale
            * match (bi, bj) {
                (0, 0) | (1, 1) => g.re,
                (0, 1) => -g.im,
                _ => g.im,
            }
    });
    let sv = h_tilde.clone().singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    let h_tilde_inv = h_tilde
        .clone()
        .try_inverse()
        .filter(|_| smin > 1e-10 * smax)
        .ok_or(Error::Singular {
            what: "H̃",
            condition: smax / smin,
        })?;
    Ok(RealBlockChannel {
        h_tilde,
        h_tilde_inv,
        lambda_min: smin,
        noise_var: spec.noise_var,
    })
}

/// Per-variable noise variance after de-mixing, `σ² (H̃⁻¹H̃⁻ᵀ)_jj`, averaged
/// over the real and imaginary halves.
pub fn demixed_noise_variances(chan: &RealBlockChannel) -> Vec<f64> {
    let d = chan.dim();
    let a = chan.h_tilde_inv();
    let gram = a * a.transpose();
    (0..d)
        .map(|j| chan.noise_var() * 0.5 * (gram[(j, j)] + gram[(j + d, j + d)]))
        .collect()
}

/// Received real vectors, one `2d`-row per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedMatrix(DMatrix<f64>);

impl ReceivedMatrix {
    pub fn new(m: DMatrix<f64>) -> Self {
        ReceivedMatrix(m)
    }

    /// Number of channel uses.
    pub fn uses(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Send sample pairs `(x⁽²ⁱ⁾, x⁽²ⁱ⁺¹⁾)` as real and imaginary parts of one
/// channel use: row `i` of the output is `H̃ [x⁽²ⁱ⁾; x⁽²ⁱ⁺¹⁾] + z̃` with each
/// noise component `N(0, σ_z²)`. An odd trailing sample is dropped.
pub fn transmit_uncoded(
    samples: &SampleMatrix,
    chan: &RealBlockChannel,
    noise_seed: u64,
) -> Result<ReceivedMatrix> {
    let d = chan.dim();
    if samples.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: samples.dim(),
        });
    }
    let n = samples.n();
    if n % 2 == 1 {
        log::warn!("odd sample count {n}: dropping the last sample before uncoded transmission");
    }
    let uses = n / 2;
    if uses == 0 {
        return Err(Error::invalid(
            "uncoded transmission needs at least two samples",
        ));
    }
    let x = samples.as_matrix();
    let stacked = DMatrix::from_fn(uses, 2 * d, |i, c| {
        if c < d {
            x[(2 * i, c)]
        } else {
            x[(2 * i + 1, c - d)]
        }
    });
    let mut y = stacked * chan.h_tilde.transpose();
    if chan.noise_var > 0.0 {
        let sd = chan.noise_var.sqrt();
        let mut rng = seeds::rng(noise_seed);
        for i in 0..uses {
            for c in 0..2 * d {
                let z: f64 = rng.sample(StandardNormal);
                y[(i, c)] += sd * z;
            }
        }
    }
    Ok(ReceivedMatrix(y))
}

/// Deliver sign bits over an ideal channel code, provided the rate region
/// admits one bit per channel use for every machine.
pub fn transport_signs(bits: &SignMatrix, spec: &ChannelSpec) -> Result<SignMatrix> {
    SignsLink::admit(spec)?.deliver(bits)
}

/// A channel that passed the Signs rate-region gate. Holding one is the only
/// way to deliver sign bits, so the gate cannot be skipped, but repeated
/// trials over the same channel pay for it once.
#[derive(Debug, Clone, PartialEq)]
pub struct SignsLink {
    dim: usize,
}

impl SignsLink {
    /// Require `R_j = 1` for every machine to lie in the rate region.
    /// A noiseless channel is admitted unconditionally.
    pub fn admit(spec: &ChannelSpec) -> Result<Self> {
        match rate_region_feasible(spec, &vec![1.0; spec.dim()]) {
            Ok(report) if report.feasible => {}
            Ok(report) => {
                return Err(Error::RateRegionViolated {
                    subset: report.tightest_subset,
                    excess: -report.tightest_slack,
                })
            }
            Err(Error::Unconstrained) => {}
            Err(e) => return Err(e),
        }
        Ok(SignsLink { dim: spec.dim() })
    }

    /// Error-free delivery.
    pub fn deliver(&self, bits: &SignMatrix) -> Result<SignMatrix> {
        if bits.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: bits.dim(),
            });
        }
        Ok(bits.clone())
    }
}
