use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}", path = .path.display())]
    ConfigAt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}", path = .path.display())]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: malformed trace: {message}", path = .path.display())]
    Trace {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigAt { .. }
            | CliError::Config { .. }
            | CliError::Usage(_)
            | CliError::Trace { .. } => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 3,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}
