use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid block layout: {0}")]
    InvalidLayout(String),

    #[error("block index {index} out of range ({blocks} blocks)")]
    BlockOutOfRange { index: usize, blocks: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("curvature pair violates positive definiteness (s'y = {sy})")]
    NonPositiveCurvature { sy: f64 },

    #[error("zero parameter change; curvature undefined")]
    ZeroStep,

    #[error("no snapshot taken yet; cannot form a curvature pair")]
    NoSnapshot,

    #[error("history buffer is empty; no curvature information available")]
    NoCurvature,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("empty batch")]
    EmptyBatch,

    #[error("dataset parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("simulation integrity violated: {0}")]
    Integrity(String),

    #[error("missing cost-model inputs: {}", .0.join(", "))]
    MissingInputs(Vec<&'static str>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
