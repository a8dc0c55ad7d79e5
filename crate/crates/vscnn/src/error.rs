use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad command-line argument or configuration value.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Unreadable, malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 2 for invalid arguments, 3 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { context: path.display().to_string(), source }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Core errors raised while processing input data.
impl From<vscnn_core::Error> for Error {
    fn from(e: vscnn_core::Error) -> Self {
        match e {
            vscnn_core::Error::InvalidArgument(msg) => Error::Data(msg),
            other => Error::Data(other.to_string()),
        }
    }
}

/// Maps a core error from validating user-supplied settings.
pub(crate) fn config_error(e: vscnn_core::Error) -> Error {
    match e {
        vscnn_core::Error::InvalidArgument(msg) => Error::InvalidArgument(msg),
        other => Error::InvalidArgument(other.to_string()),
    }
}
