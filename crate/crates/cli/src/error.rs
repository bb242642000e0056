//! CLI error taxonomy mapped onto process exit codes.

use prescreen_core::select::SelectError;
use prescreen_core::{DatasetError, HarnessError};
use thiserror::Error;

/// Every failure a command can surface, tagged with its exit code:
/// 2 config/input, 3 degenerate data, 4 training failure, 5 merge conflict.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Training(String),
    #[error("{0}")]
    MergeConflict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Training(_) => 4,
            CliError::MergeConflict(_) => 5,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(err: DatasetError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<SelectError> for CliError {
    fn from(err: SelectError) -> Self {
        match err {
            SelectError::DegenerateSplit { .. }
            | SelectError::Stats(_)
            | SelectError::TooFewCandidates(_) => CliError::Degenerate(err.to_string()),
            SelectError::InvalidConfig(_) | SelectError::UnknownFeature(_) => {
                CliError::Config(err.to_string())
            }
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        match err {
            HarnessError::TooManyDegenerateFolds { .. } | HarnessError::Stats(_) => {
                CliError::Degenerate(err.to_string())
            }
            HarnessError::InvalidPlan(_) | HarnessError::EmptyReport => {
                CliError::Config(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Config(err.to_string())
    }
}
