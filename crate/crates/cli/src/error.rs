//! CLI errors and their exit codes.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("invalid configuration at `{path}`: {message}")]
    Invalid { path: String, message: String },

    #[error("cannot read {}: {source}", .path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", .path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("signal input: {0}")]
    Signal(raf_lab_core::Error),

    #[error("numeric abort: {0}")]
    Numeric(raf_lab_core::Error),

    #[error(transparent)]
    Core(raf_lab_core::Error),
}

impl CliError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Invalid { path: path.into(), message: message.into() }
    }

    /// 0 success, 2 configuration, 3 numeric abort, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownKeys(_) | CliError::Invalid { .. } | CliError::Core(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Read { .. } | CliError::Write { .. } | CliError::Signal(_) => 4,
        }
    }
}

impl From<raf_lab_core::Error> for CliError {
    fn from(e: raf_lab_core::Error) -> Self {
        use raf_lab_core::Error as E;
        match e {
            E::NumericOverflow(_) | E::UndefinedMetric(_) | E::DegenerateKernel { .. } => CliError::Numeric(e),
            E::Io(_) | E::Format { .. } => CliError::Signal(e),
            _ => CliError::Core(e),
        }
    }
}
