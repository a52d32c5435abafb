use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    File {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("density solve failed at {failed} of {total} grid points, first at x = {first_x}")]
    PartialDensity {
        failed: usize,
        total: usize,
        first_x: f64,
    },
    #[error(transparent)]
    Core(#[from] graphdep::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical non-convergence, 1 for internal
    /// failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(graphdep::Error::Diverged { .. } | graphdep::Error::NoConvergence)
            | CliError::PartialDensity { .. } => 3,
            CliError::Core(graphdep::Error::Internal(_)) => 1,
            _ => 2,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
