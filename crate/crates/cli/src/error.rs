use std::path::PathBuf;

use tensegrity_core::NoPathReason;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const NO_PATH: i32 = 4;
    pub const DIVERGENCE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: line {line}{}: {message}", path.display(), field.as_ref().map(|f| format!(", field `{f}`")).unwrap_or_default())]
    Parse { path: PathBuf, line: u64, field: Option<String>, message: String },

    #[error("no path: {0}")]
    NoPath(NoPathReason),

    #[error("diverged: {0}")]
    Divergence(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(tensegrity_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Parse { .. } => exit::PARSE,
            CliError::NoPath(_) => exit::NO_PATH,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::Io { .. } | CliError::Core(_) => exit::FAILURE,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, field: Option<&str>, message: impl ToString) -> Self {
        CliError::Parse { path: path.into(), line, field: field.map(str::to_owned), message: message.to_string() }
    }
}

impl From<tensegrity_core::Error> for CliError {
    fn from(e: tensegrity_core::Error) -> Self {
        use tensegrity_core::Error as E;
        match e {
            E::NoPath(r) => CliError::NoPath(r),
            E::IntegrationBlowup { .. } | E::BlowupAt { .. } | E::NonFiniteLoss => CliError::Divergence(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
