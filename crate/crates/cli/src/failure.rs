//! Command failures and their process exit codes.

use std::fmt;

use leadlag::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
pub const EXIT_BUDGET: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    /// Prefixes the message, keeping the exit code.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonMonotone { .. }
        | Error::Duplicate { .. }
        | Error::OutOfWindow { .. }
        | Error::InvalidWindow(_)
        | Error::WindowMismatch(..)
        | Error::EmptySeries(_)
        | Error::InvalidParameter(_)
        | Error::AlphaExcluded
        | Error::UnstableSpec(_)
        | Error::UnsupportedRates => EXIT_DATA,
        Error::BudgetExceeded(_) => EXIT_BUDGET,
        Error::RangeTooNarrow { .. }
        | Error::DegenerateDenominator { .. }
        | Error::EmptyGrid
        | Error::EmptySet
        | Error::EmptyDiffs
        | Error::NoAdmissibleBandwidth
        | Error::AllScoresInfinite
        | Error::PoleAt(_)
        | Error::OracleUnavailable
        | Error::InsufficientPoints { .. } => EXIT_NUMERICAL,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
