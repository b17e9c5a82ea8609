//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("sample weights sum to zero; the weighted mean loss is undefined")]
    ZeroWeightSum,

    #[error("non-finite {what} encountered in {context}")]
    NonFinite { what: String, context: String },

    #[error("invalid {key}: {message}")]
    InvalidValue { key: String, message: String },

    #[error("minority group is empty; no pairs available for mixing")]
    EmptyMinority,

    #[error("degenerate assignment: one group holds (almost) no soft mass")]
    DegenerateAssignment,

    #[error("dataset carries no group labels and no assignment was supplied")]
    MissingGroups,

    #[error("{op} requires a linear model")]
    UnsupportedArchitecture { op: String },

    #[error(
        "balance loss undefined: class {class} has zero overall probability \
         but nonzero conditional mass"
    )]
    KlUndefined { class: usize },

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    CsvCell {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    CsvFile { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: &str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            context: context.to_string(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn invalid(key: &str, message: impl ToString) -> Self {
        Error::InvalidValue {
            key: key.to_string(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
