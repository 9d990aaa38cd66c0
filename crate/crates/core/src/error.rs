use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {actual}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },

    #[error("need at least {min} observations, got {n}")]
    TooFewObservations { n: usize, min: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("centered matrix kind mismatch: {0}")]
    KindMismatch(String),

    #[error("statistic {value:e} is negative beyond round-off (scale {scale:e})")]
    NegativeStatistic { value: f64, scale: f64 },

    #[error("design is rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid permutation plan: {0}")]
    InvalidPlan(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("partial F-test supports a single response column, got q = {0}")]
    UnsupportedResponseDim(usize),

    #[error("replicate list is empty")]
    EmptyReplicates,

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("missing value in column {column:?} at row {row} (year {year})")]
    MissingValue {
        row: usize,
        year: String,
        column: String,
    },

    #[error("non-numeric cell {value:?} in column {column:?} at row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures caused by the numbers rather than the shape of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_) | Error::NegativeStatistic { .. }
        )
    }
}
