//! Structure learning of sparse Gaussian graphical models whose dimensions
//! live on separate machines behind a Gaussian multiple-access channel.
//!
//! Two transmission schemes are simulated end to end:
//!
//! * **Signs**: every machine sends the sign of each sample over an ideal
//!   channel code (admitted only when the channel's rate region allows one
//!   bit per sample). The receiver inverts the arcsine law to estimate
//!   correlations.
//! * **Uncoded**: machines send pairs of raw samples as complex symbols.
//!   The receiver de-mixes and de-biases the noisy observations.
//!
//! Either covariance estimate is handed to an ℓ1-regularized log-determinant
//! solver ([`solver::glasso_solve`]) and the recovered support is scored
//! against the ground truth ([`metrics::score`]).
//!
//! The [`harness`] module runs declarative sweep experiments and writes
//! deterministic CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod matrix_io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seeds;
pub mod solver;

pub use channel::{
    ChannelSpec, FadingModel, RateRegionReport, RealBlockChannel, ReceivedMatrix, SignsLink,
};
pub use error::{Error, Result};
pub use estimators::{CovarianceEstimate, Provenance, SignMatrix};
pub use metrics::{RecoveryReport, TheoremBounds};
pub use model::{GgmModel, ModelConstants, RandomModelSpec, SampleMatrix};
pub use pipeline::{Method, Pipeline};
pub use solver::{SolverConfig, SolverResult};
