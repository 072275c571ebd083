use thiserror::Error;

/// Errors raised by the detector, state-evolution and experiment code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("NaN input to quantizer")]
    NanInput,

    #[error("level {level} is not in the output alphabet of the quantizer")]
    NotALevel { level: f64 },

    #[error("non-finite value at iteration {iteration}, line {line} ({quantity})")]
    NonFinite {
        iteration: usize,
        line: u8,
        quantity: &'static str,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("operation undefined for a Gaussian constellation: {0}")]
    NoDecisionRule(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
