use thiserror::Error;

/// Errors produced by the maxout library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A binary or text input did not match its declared layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A numerical routine failed. `condition` carries a condition-number
    /// estimate when one is available.
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        condition: Option<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn numerical(msg: impl Into<String>, condition: Option<f64>) -> Self {
        Error::Numerical {
            message: msg.into(),
            condition,
        }
    }
}
