//! Experiment runner for DaRePlane: configuration, synthetic scenes and
//! the `fit`, `compare`, `transform` and `inspect` commands.

pub mod commands;
pub mod config;
pub mod scene;

use std::path::PathBuf;

pub use commands::{compare, fit, inspect, transform, CompareOutcome, FitOutcome, TransformOutcome};
pub use config::Config;

/// Errors of a command, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dareplane::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for a numeric abort, 4 for archive
    /// integrity failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use dareplane::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::NumericAbort { .. }) => 3,
            CliError::Core(E::Archive(_)) => 4,
            CliError::Core(E::InvalidShape { .. } | E::ShapeMismatch { .. } | E::Invalid(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

/// Worker cap from `DAREPLANE_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("DAREPLANE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "DAREPLANE_THREADS must be a positive integer, got '{v}'"
            ))),
        },
    }
}
