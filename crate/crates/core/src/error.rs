use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants fall into three families (configuration, data, numerical) so the
/// command-line front end can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("k = {k} is invalid for {n} entities")]
    InvalidK { k: usize, n: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("zero dispersion in cluster {cluster}, feature {feature}")]
    ZeroDispersion { cluster: usize, feature: usize },

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("anomalous-pattern extraction found {found} clusters, {needed} needed")]
    TooFewAnomalousClusters { found: usize, needed: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl ClusterError {
    pub fn class(&self) -> ErrorClass {
        use ClusterError::*;
        match self {
            InvalidConfig(_) | InvalidK { .. } => ErrorClass::Usage,
            InvalidData(_)
            | NonFinite { .. }
            | Parse { .. }
            | DimensionMismatch { .. }
            | Empty(_)
            | Io(_)
            | Csv(_)
            | Json(_) => ErrorClass::Data,
            Degenerate(_)
            | ZeroDispersion { .. }
            | NoConvergence(_)
            | TooFewAnomalousClusters { .. }
            | Numerical(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClusterError>;
