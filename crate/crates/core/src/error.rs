use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Beta-process hyperparameters violated a validity constraint.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A numerical routine failed to reach its tolerance or lost definiteness.
    #[error("numerical error: {message}")]
    Numerical { message: String, achieved: Option<f64> },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical { message: msg.into(), achieved: None }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
