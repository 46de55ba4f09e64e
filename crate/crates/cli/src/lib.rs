//! File formats and commands behind the `fermigrade` binary.

pub mod input;
pub mod run;

use fermigrade_core::Error;

use crate::input::{LookupError, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{}: {}", source.line, source.message)]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for malformed input files, 3 for sector ceilings, 4 for a failed
    /// `--verify`, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse { .. } => 2,
            Self::Core(Error::SectorTooLarge { .. }) => 3,
            Self::Core(Error::ConstraintViolated { .. }) => 4,
            _ => 1,
        }
    }
}
