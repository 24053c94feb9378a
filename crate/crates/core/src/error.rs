use std::path::PathBuf;

use thiserror::Error;

/// Errors reported by the solver library.
///
/// Row, column and node indices carried by the variants are 1-based so that
/// messages line up with CSV line numbers and the usual matrix notation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("value of `{field}` at index {index} is out of range: {value} (expected {expected})")]
    OutOfRange {
        field: &'static str,
        index: usize,
        value: f64,
        expected: &'static str,
    },

    #[error("non-finite value in `{field}` at row {row}, col {col}")]
    NonFinite {
        field: &'static str,
        row: usize,
        col: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("need at least 2 points to build a neighbor graph, got {0}")]
    TooFewPoints(usize),

    #[error("neighbor count K={k} must be smaller than the number of points n={n}")]
    NeighborCount { k: usize, n: usize },

    #[error("fused prox optimality residual {residual:e} exceeds bound {bound:e}")]
    ProxKkt { residual: f64, bound: f64 },

    #[error("LP too large: {vars} variables exceeds the limit of {limit}")]
    LpTooLarge { vars: usize, limit: usize },

    #[error("LP solve failed: {0}")]
    Lp(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
