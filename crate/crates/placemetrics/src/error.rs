//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`crate::Result`]. Variants
//! are grouped by failure class so callers (CLI, bindings) can map them to
//! machine-readable error reports without string matching.

use thiserror::Error;

/// Errors produced by matrix construction, analysis, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain (percent out of
    /// `[0, 100]`, invalid degrees of freedom, empty count vector, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A response matrix invariant was violated (ragged rows, non-binary
    /// cells, duplicate ids, partial labelling).
    #[error("invalid response matrix: {0}")]
    InvalidMatrix(String),

    /// The input has too few observations for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A stratified split could not be constructed.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// A clustering request that cannot be satisfied by the data
    /// (for example more clusters than distinct points).
    #[error("infeasible clustering: {0}")]
    Infeasible(String),

    /// Item response calibration failed to converge for the listed
    /// (zero-based) item indices.
    #[error("calibration failed for items {0:?}")]
    Calibration(Vec<usize>),

    /// Malformed CSV input. `row` is the 1-based line number including the
    /// header; `column` is the 1-based field index when known.
    #[error("csv error at line {row}{}: {message}", column.map(|c| format!(", field {c}")).unwrap_or_default())]
    Csv {
        row: usize,
        column: Option<usize>,
        message: String,
    },

    /// The operation requires placement labels but the matrix has none.
    #[error("matrix has no placement labels: {0}")]
    MissingLabels(String),

    /// Two sequences that must agree in length did not.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A persisted model or report could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidMatrix(_) => "invalid_matrix",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Stratification(_) => "stratification",
            Error::Infeasible(_) => "infeasible",
            Error::Calibration(_) => "calibration",
            Error::Csv { .. } => "csv",
            Error::MissingLabels(_) => "missing_labels",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
