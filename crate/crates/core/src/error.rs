use thiserror::Error;

use crate::iterate::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max |Q_ij - Q_ji| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("solve strategy `{strategy}` is not applicable: {reason}")]
    StrategyInapplicable { strategy: String, reason: String },

    #[error("inclusion residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("unsupported metric-prox combination: {0}")]
    UnsupportedMetricProx(String),

    #[error("no conjugate machinery for {0}")]
    UnsupportedConjugate(String),

    #[error("bound `{formula}` not applicable: {predicate}")]
    BoundNotApplicable { formula: String, predicate: String },

    #[error("trace is missing channel `{0}`")]
    MissingChannel(String),

    #[error("operator not certified monotone: {0}")]
    NotMonotone(String),

    #[error("metric not positive definite: {0}")]
    MetricNotPd(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("reference solution not found: {0}")]
    ReferenceFailed(String),

    #[error("iteration aborted at step {step}: {source}")]
    IterationAborted {
        step: usize,
        source: Box<Error>,
        partial: Box<IterationTrace>,
    },

    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
