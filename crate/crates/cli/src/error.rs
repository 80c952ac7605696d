use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration text could not be parsed.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    /// The configuration parsed but describes an invalid experiment.
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A file was read but its contents are unusable.
    #[error("{}: {message}", path.display())]
    CorruptFile { path: PathBuf, message: String },
    #[error("computation failed: {0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for everything that happens after validation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 1,
            CliError::Io { .. } | CliError::CorruptFile { .. } | CliError::Runtime(_) => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn runtime(e: mns_core::MnsError) -> CliError {
    CliError::Runtime(e.to_string())
}

pub(crate) fn invalid(e: mns_core::MnsError) -> CliError {
    CliError::Validation(e.to_string())
}
