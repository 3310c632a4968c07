//! One end-to-end trial: sample → transmit → estimate → solve → score.

use nalgebra::{DMatrix, DVector};

use crate::channel::{self, ChannelSpec, RealBlockChannel, SignsLink};
use crate::error::{Error, Result};
use crate::estimators::{self, CovarianceEstimate};
use crate::metrics::{self, RecoveryReport};
use crate::model::{GgmModel, SampleMatrix};
use crate::seeds::{self, stream};
use crate::solver::{self, SolverConfig, SolverResult};

/// The three ways the central machine can obtain a covariance estimate.
pub use crate::estimators::Provenance as Method;

impl Method {
    pub const ALL: [Method; 3] = [Method::Original, Method::Signs, Method::Uncoded];
}

#[derive(Debug, Clone)]
enum Link {
    Direct,
    Signs(SignsLink),
    Uncoded(RealBlockChannel),
}

/// A method bound to a channel and a solver configuration. The channel is
/// admitted (Signs) or factored (Uncoded) once at construction.
#[derive(Debug, Clone)]
pub struct Pipeline {
    method: Method,
    link: Link,
    solver: SolverConfig,
    /// Per-variable scales `D`: the solver sees `D⁻¹ŜD⁻¹`, which is the
    /// entrywise penalty `λ D_jj D_kk` on `Ŝ`.
    scales: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub estimate: CovarianceEstimate,
    pub result: SolverResult,
    pub report: RecoveryReport,
}

impl Pipeline {
    /// `channel` is required for Signs and Uncoded and ignored for Original.
    pub fn new(
        method: Method,
        channel: Option<&ChannelSpec>,
        solver: SolverConfig,
    ) -> Result<Self> {
        solver.validate()?;
        let need = || Error::invalid(format!("method '{method}' needs a channel"));
        let link = match method {
            Method::Original => Link::Direct,
            Method::Signs => Link::Signs(SignsLink::admit(channel.ok_or_else(need)?)?),
            Method::Uncoded => Link::Uncoded(channel::build_real_block(channel.ok_or_else(need)?)?),
        };
        Ok(Pipeline {
            method,
            link,
            solver,
            scales: None,
        })
    }

    pub fn original(solver: SolverConfig) -> Self {
        Pipeline {
            method: Method::Original,
            link: Link::Direct,
            solver,
            scales: None,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut p = self.clone();
        p.solver.lambda = lambda;
        p
    }

    /// Penalize each Uncoded entry in proportion to its de-mixed noise level,
    /// `√((1 + v_j)(1 + v_k))`. No effect on the other methods.
    pub fn with_noise_whitening(mut self) -> Self {
        if let Link::Uncoded(chan) = &self.link {
            let v = channel::demixed_noise_variances(chan);
            self.scales = Some(DVector::from_iterator(
                v.len(),
                v.iter().map(|x| (1.0 + x).sqrt()),
            ));
        }
        self
    }

    /// Channel for the Uncoded method, if any.
    pub fn real_block(&self) -> Option<&RealBlockChannel> {
        match &self.link {
            Link::Uncoded(c) => Some(c),
            _ => None,
        }
    }

    /// Covariance estimate formed at the central machine.
    pub fn estimate(&self, samples: &SampleMatrix, noise_seed: u64) -> Result<CovarianceEstimate> {
        match &self.link {
            Link::Direct => estimators::sample_covariance(samples),
            Link::Signs(link) => {
                let bits = link.deliver(&estimators::sign_quantize(samples))?;
                estimators::signs_covariance(&bits)
            }
            Link::Uncoded(chan) => {
                let received = channel::transmit_uncoded(samples, chan, noise_seed)?;
                estimators::uncoded_covariance(&received, chan)
            }
        }
    }

    /// Estimate, solve and score on already-drawn samples.
    pub fn run_on(
        &self,
        model: &GgmModel,
        samples: &SampleMatrix,
        noise_seed: u64,
    ) -> Result<TrialOutcome> {
        let estimate = self.estimate(samples, noise_seed)?;
        let result = self.solve(&estimate)?;
        let report = metrics::score(model, &result)?;
        Ok(TrialOutcome {
            estimate,
            result,
            report,
        })
    }

    /// Solve on an estimate, applying the per-variable scales if set.
    pub fn solve(&self, estimate: &CovarianceEstimate) -> Result<SolverResult> {
        let Some(dv) = &self.scales else {
            return solver::glasso_solve(estimate, &self.solver);
        };
        let s = estimate.matrix();
        let scaled = DMatrix::from_fn(s.nrows(), s.ncols(), |j, k| s[(j, k)] / (dv[j] * dv[k]));
        let mut r = solver::glasso_solve_matrix(&scaled, &self.solver)?;
        let d = s.nrows();
        for j in 0..d {
            for k in 0..d {
                r.theta_hat[(j, k)] /= dv[j] * dv[k];
                r.sigma_hat[(j, k)] *= dv[j] * dv[k];
            }
        }
        Ok(r)
    }

    /// Full trial with sampling and channel-noise seeds derived from
    /// `trial_seed`. The samples do not depend on the method.
    pub fn run_trial(&self, model: &GgmModel, n: usize, trial_seed: u64) -> Result<TrialOutcome> {
        let samples = model.sample(n, seeds::derive(trial_seed, stream::SAMPLING))?;
        self.run_on(model, &samples, seeds::derive(trial_seed, stream::NOISE))
    }
}
