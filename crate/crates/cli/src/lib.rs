//! Library side of the `krein-ball` command-line tool: config handling,
//! parameter formulas, the subcommands and the verification suite.

pub mod commands;
pub mod config;
pub mod formula;
pub mod suites;

use krein_ball::ErrorCategory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] krein_ball::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    /// 0 success, 1 config, 2 admissibility, 3 numerical, 4 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => 1,
                ErrorCategory::Admissibility => 2,
                ErrorCategory::Numerical => 3,
            },
            CliError::VerifyFailed(_) => 4,
        }
    }
}
