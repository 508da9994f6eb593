//! Batch driver for the HDG Stokes solver: single solves, refinement studies,
//! verification suites and matrix export.

pub mod commands;
pub mod config;
mod output;

use hdgstokes::HdgError;

pub use commands::{export_matrices, run_solve, run_study, run_verify, SolveReport, StudyReport, VerifyReport};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid configuration or arguments.
    #[error("configuration error: {0}")]
    Config(String),

    /// The run finished but a solve did not converge or a check failed.
    /// Reports have been written.
    #[error("{0}")]
    Failed(String),

    #[error(transparent)]
    Numerics(HdgError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<HdgError> for CliError {
    fn from(e: HdgError) -> Self {
        match e {
            HdgError::InvalidMesh(_) | HdgError::InvalidDegree(_) | HdgError::InvalidOption(_) => {
                CliError::Config(e.to_string())
            }
            HdgError::Io(io) => CliError::Io(io),
            other => CliError::Numerics(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    /// Process exit code: 1 for failed runs, 2 for configuration errors and
    /// 3 for numerical or i/o errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerics(_) | CliError::Io(_) => 3,
        }
    }
}
