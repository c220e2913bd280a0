use thiserror::Error;

use crate::qstate::Frame;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported dimension {dim} for {what}")]
    UnsupportedDimension { dim: usize, what: &'static str },

    #[error("cannot build {requested} mutually unbiased bases in dimension {dim} (need 2 <= M <= d+1)")]
    InvalidBasisCount { dim: usize, requested: usize },

    #[error("state is on the {actual:?} side, operation requires {expected:?}")]
    WrongFrame { expected: Frame, actual: Frame },

    #[error("amplitudes not normalized: squared norm {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("invalid beam geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid too coarse: self-overlap of {mode} is {self_overlap}, tolerance {tolerance}")]
    GridTooCoarse {
        mode: String,
        self_overlap: f64,
        tolerance: f64,
    },

    #[error("invalid session configuration: {0}")]
    ConfigInvalid(String),
}
