use std::path::PathBuf;

use thiserror::Error;

/// A parse failure pinned to a position in a text file (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{0}")]
    Data(String),

    /// A failure inside the numerical core.
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: dlam_core::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: dlam_core::Error) -> Self {
        Error::Core {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 data or I/O, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Core { source, .. } => match source {
                dlam_core::Error::Diverged { .. }
                | dlam_core::Error::Singular
                | dlam_core::Error::NonFinite { .. } => 3,
                dlam_core::Error::InvalidConfig(_) => 1,
                _ => 2,
            },
            Error::Config { .. } => 1,
            Error::Io { .. } | Error::Format { .. } | Error::Data(_) | Error::Csv(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
