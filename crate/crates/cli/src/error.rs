use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] powerctl_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use powerctl_core::Error as E;
        match self {
            CliError::Input(_) | CliError::Read { .. } => EXIT_INVALID_INPUT,
            CliError::Core(E::Infeasible(_)) => EXIT_INFEASIBLE,
            CliError::Core(E::Convergence { .. } | E::Divergence { .. } | E::Oscillation { .. }) => EXIT_NOT_CONVERGED,
            CliError::Core(_) => EXIT_INVALID_INPUT,
            CliError::Write { .. } | CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.exit_code() {
            EXIT_INVALID_INPUT => "invalid_input",
            EXIT_INFEASIBLE => "infeasible",
            EXIT_NOT_CONVERGED => "not_converged",
            _ => "internal_error",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
