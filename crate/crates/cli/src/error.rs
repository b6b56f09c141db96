use std::path::PathBuf;

use crate::formats::FormatError;

/// Failure of a subcommand, mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    /// Solver did not reach its gap tolerance, or rounding ran out of rounds.
    #[error("{0}")]
    Budget(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Budget(_) => EXIT_BUDGET,
            Self::Io { .. } => EXIT_IO,
            Self::Format { source: FormatError::Invalid(_), .. } => EXIT_VALIDATION,
            Self::Format { .. } => EXIT_IO,
        }
    }
}

impl From<mcrelax::Error> for CliError {
    fn from(e: mcrelax::Error) -> Self {
        match e {
            mcrelax::Error::RoundingBudget { .. } | mcrelax::Error::TooManyRoundingFailures { .. } => {
                Self::Budget(e.to_string())
            }
            _ => Self::Validation(e.to_string()),
        }
    }
}
