//! Crate-wide error type.

use crate::tensor::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Shape,
        rhs: Shape,
    },

    #[error("{op}: spatial dims of {shape} must be even; pad the input first")]
    OddSpatialDims { op: &'static str, shape: Shape },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("elementwise div: divisor contains zero at element {index}")]
    DivisionByZero { index: usize },

    #[error("backward requires a scalar loss, got shape {shape}")]
    NonScalarLoss { shape: Shape },

    #[error("backward reached the non-differentiable op `{op}`")]
    NonDifferentiable { op: &'static str },

    #[error("loss tensor was not produced under the active recording")]
    UntrackedLoss,

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: String, step: u64 },

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },

    #[error("image {path}: {msg}")]
    Image { path: String, msg: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }
}
