use std::io;

use crate::params::FlatParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two parameter containers with different structure were combined.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Width or dimension conditions required by a construction do not hold.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("non-finite or invalid numeric input: {0}")]
    NumericInput(String),

    #[error("parameters are not a global minimum: {0}")]
    NotOnManifold(String),

    /// No two-piece center exists: teacher coordinate `coordinate` has no
    /// row compatible with both inputs.
    #[error("no two-piece linear center: coordinate {coordinate} has empty shared support")]
    NotTwoPlConnectable { coordinate: usize },

    #[error("optimization diverged at step {step}")]
    Divergence {
        step: usize,
        last_finite: Box<FlatParams>,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
