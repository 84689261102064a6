//! CLI error taxonomy with fixed exit codes:
//! 0 pass, 1 assertion failure, 2 usage/config error, 3 I/O error.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Assertion(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<tlab_core::Error> for CliError {
    fn from(e: tlab_core::Error) -> Self {
        use tlab_core::Error as E;
        match e {
            E::Io(_) | E::SnapshotFormat { .. } => CliError::Io(e.to_string()),
            E::NotUnitNorm { .. } | E::DegenerateNode { .. } | E::EnergyIncrease { .. } => {
                CliError::Assertion(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
