use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{what} is singular (condition number ~ {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("incoherence violated: |||Γ_ScS Γ_SS⁻¹|||∞ = {value} ≥ 1")]
    IncoherenceViolated { value: f64 },

    #[error("dimension {d} exceeds the cap of {cap} for this operation")]
    DimensionTooLarge { d: usize, cap: usize },

    #[error("gave up after {attempts} attempts: {reason}")]
    RetryBudgetExhausted { attempts: usize, reason: String },

    #[error("channel is unconstrained (zero noise variance gives infinite rate)")]
    Unconstrained,

    #[error("rate region violated: subset {subset:?} exceeds capacity by {excess} bits")]
    RateRegionViolated { subset: Vec<usize>, excess: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
