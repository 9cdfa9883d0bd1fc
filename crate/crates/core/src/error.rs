use std::path::PathBuf;

use crate::energy::Violation;
use crate::qp::QpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("clique {clique} is not submodular: {violation}")]
    NotSubmodular { clique: usize, violation: Violation },

    #[error("too many variables for exhaustive search: {0} (limit {1})")]
    TooLarge(usize, usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("capacity exceeded on {arc}: push {delta} > residual {capacity}")]
    CapacityExceeded { arc: String, delta: f64, capacity: f64 },

    #[error("QP did not converge after {} iterations", .0.iterations)]
    QpNotConverged(Box<QpSolution>),

    #[error("QP is infeasible")]
    QpInfeasible,

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
