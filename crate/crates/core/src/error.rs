use std::io;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Evaluation outside the domain of a formula, typically pricing at `t >= T`.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric underflow: {0}")]
    NumericUnderflow(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An agent was asked to act on information that is not current.
    #[error("state error: {0}")]
    State(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from a bad configuration or argument.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidArgument(_) | Error::Json(_)
        )
    }

    /// True for errors that stem from a numerical breakdown.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericUnderflow(_) | Error::Numeric(_) | Error::Domain(_) | Error::UndefinedRatio(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
