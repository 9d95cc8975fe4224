use thiserror::Error;

use crate::setcore::VertexSet;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The instance is outside the exact-mode envelope; use the Monte Carlo estimator.
    #[error("exact computation infeasible: {0}")]
    ExactInfeasible(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("edge {edge} has only {available} extensions available, {needed} required")]
    InsufficientExtensions {
        edge: VertexSet,
        available: usize,
        needed: usize,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
