use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", list(.0))]
    Config(Vec<ConfigError>),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dirform::Error),

    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },

    #[error("{0}")]
    Internal(String),
}

fn list(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// Process exit code; library errors keep their own codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(e) => e.exit_code(),
            CliError::Io { .. } => 9,
            CliError::Internal(_) => 1,
        }
    }
}
