use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("row {0} sums to {1}, not 1")]
    RowSumViolation(usize, f64),
    #[error("vector sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("{0} blocks of {1} rows do not fit in a vocabulary of {2}")]
    BlockOverflow(usize, usize, usize),
    #[error("kernel is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        /// Cesàro average of the iterates, usable for periodic chains.
        averaged: Vec<f64>,
    },
    #[error("{0} is outside [0, 1]")]
    DomainError(f64),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigenvalue {0} outside [0, 1]")]
    EigenvalueOutOfRange(f64),
    #[error("recovered kernel has negative entry {value:e} at ({row}, {col})")]
    NotRepresentable { row: usize, col: usize, value: f64 },
    #[error("rows {0} and {1} differ (max abs difference {2:e})")]
    RowsNotEqual(usize, usize, f64),
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("model probability {0} is not positive")]
    NonpositiveModelProb(f64),
    #[error("empty group")]
    EmptyGroup,
    #[error("zero vector")]
    ZeroVector,
    #[error("corpus has no usable pivot positions")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("category {0:?} is empty or missing")]
    EmptyCategory(String),
    #[error("slice has no tokens")]
    EmptySlice,
    #[error("no word of group {0:?} is in the vocabulary")]
    NoGroupOverlap(String),
    #[error("word {0:?} is not in the vocabulary")]
    WordNotInVocab(String),
    #[error("could not construct a valid matrix after {0} attempts")]
    ConstructionFailed(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from invalid input rather than a failed
    /// numerical computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. }
                | Error::ConstructionFailed(_)
                | Error::NotRepresentable { .. }
                | Error::Io { .. }
        )
    }
}
