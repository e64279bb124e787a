use thiserror::Error;

/// Errors raised across the library.
///
/// Each variant maps to a distinct process exit code in the command-line
/// runner (see [`Error::exit_code`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource limit exceeded: {what} (requested {requested}, budget {budget})")]
    ResourceLimit {
        what: String,
        requested: u128,
        budget: u128,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("diagnostics failure: {0}")]
    Diagnostics(String),

    #[error("no jump possible: {0}")]
    NoJump(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Precondition(_) => 3,
            Error::Numerical(_) => 4,
            Error::ResourceLimit { .. } => 5,
            Error::Unsupported(_) => 6,
            Error::Diagnostics(_) => 7,
            Error::NoJump(_) => 8,
            Error::Io(_) => 9,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
