use std::fmt;
use std::path::Path;

/// Process exit codes.
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FAILED: i32 = 3;
pub const EXIT_LIMIT: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INVALID, message: message.into() }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FAILED, message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::invalid(format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with the offending file.
    pub fn in_file(self, path: &Path) -> Self {
        CliError { message: format!("{}: {}", path.display(), self.message), ..self }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<fdip_core::Error> for CliError {
    fn from(e: fdip_core::Error) -> Self {
        use fdip_core::Error as E;
        let code = match e {
            E::OracleCapExceeded { .. } | E::Overflow(_) => EXIT_LIMIT,
            E::InfeasibleAssignment(_) => EXIT_FAILED,
            _ => EXIT_INVALID,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::invalid(e.to_string())
    }
}
