use std::fmt;

use regraph_core::Error;

/// Process exit classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Other => 1,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Other,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::Csv(_) => ErrorKind::Data,
            _ => ErrorKind::Other,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

/// Failures while reading an input data file are data errors unless the
/// core already classified them as configuration problems.
pub fn input(context: &str, e: Error) -> CliError {
    let kind = match e {
        Error::Config(_) => ErrorKind::Config,
        _ => ErrorKind::Data,
    };
    CliError {
        kind,
        message: format!("{context}: {e}"),
    }
}

pub fn io(context: &str, e: std::io::Error) -> CliError {
    CliError::other(format!("{context}: {e}"))
}
