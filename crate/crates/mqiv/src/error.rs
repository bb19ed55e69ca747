//! Crate-wide error type.

/// Errors surfaced by ingestion, fitting, and estimation.
///
/// Variants are grouped so the CLI can map them onto exit codes: argument
/// misuse, data/validation problems, and estimation failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column {name:?} not found in header")]
    MissingColumn { name: String },

    /// Malformed value in a data row. `row` is 1-based over data rows
    /// (the header does not count).
    #[error("data row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A cross-fitting training cell was empty, e.g. no treated units with
    /// Z=0 in the complement of some fold. `cell` names the cell, like
    /// `(A=1, Z=0)`.
    #[error("empty training cell {cell} in complement of fold {fold}")]
    EmptyTrainingCell { cell: String, fold: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
}
