use std::fmt;
use std::path::Path;

use lbt_coex::CoexError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const NUMERICAL: u8 = 2;
    pub const IO: u8 = 3;

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::Numerical(_) => Self::NUMERICAL,
            CliError::Io(_) => Self::IO,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<CoexError> for CliError {
    fn from(e: CoexError) -> Self {
        match e {
            CoexError::InvalidParameter { .. }
            | CoexError::Parse { .. }
            | CoexError::SimBudget { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
