use thiserror::Error;

/// Errors raised by the sampling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("mixture index {index} out of range for {mixtures} mixtures")]
    MixtureIndex { index: usize, mixtures: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("log-sum-exp of two negative infinities")]
    BothNegativeInfinity,

    #[error("NaN log-density reached the acceptance test")]
    NanLogDensity,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("KL divergence undefined: reference cell {0} has zero mass where the first distribution is positive")]
    ZeroReferenceMass(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
