use std::path::PathBuf;

use thiserror::Error;

use crate::bregman::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("spectrum is not Hermitian: relative imaginary residue {residue:.3e}")]
    SymmetryViolation { residue: f64 },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("iteration diverged at outer step {step}")]
    Divergence {
        step: usize,
        trace: Vec<IterationRecord>,
    },

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("relative error undefined: reference field has zero norm")]
    UndefinedMetric,

    #[error("malformed field file {path}: {reason}")]
    MalformedInput { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::ParameterDomain(msg.into())
}
