use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the approximation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("grid of {points} points exceeds the budget of {budget}; evaluate in streaming chunks instead")]
    ResourceExhausted { points: u128, budget: usize },

    #[error("oracle returned a non-finite value at point {point:?}")]
    NonFiniteOracle { point: Vec<f64> },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("index width {bits} bits exceeds the supported 64")]
    UnsupportedPrecision { bits: u32 },

    #[error("value {value} out of range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("residual scale {scale:e} is below the exact-fit threshold")]
    Degenerate { scale: f64 },

    #[error("certification failed for layer {layer}: {reason}")]
    Certification { layer: usize, reason: String },

    #[error("projection bound violated: measured {measured:e} > bound {bound:e}")]
    BoundViolation { measured: f64, bound: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    /// Short machine-parsable category tag.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::OutOfRange { .. } => {
                "invalid-argument"
            }
            Error::ResourceExhausted { .. } => "resource-exhausted",
            Error::NonFiniteOracle { .. } => "invalid-oracle",
            Error::Divergence(_) => "divergence",
            Error::UnsupportedPrecision { .. } => "unsupported-precision",
            Error::Degenerate { .. } => "degenerate",
            Error::Certification { .. } => "certification",
            Error::BoundViolation { .. } => "bound-violation",
            Error::Parse { .. } => "parse",
            Error::Io { .. } | Error::Format { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
