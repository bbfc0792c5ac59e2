//! Experiment harness behind the `cglo` command: configuration files,
//! macroreplication runs, metrics and CSV outputs.

use std::path::{Path, PathBuf};

pub mod config;
pub mod csvio;
pub mod experiment;

pub use config::{load_spec, parse_spec, ConfigError, ExperimentSpec};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("unknown optimizer {0:?}")]
    UnknownOptimizer(String),

    #[error("{0}")]
    Environment(String),

    #[error("{optimizer} with seed {seed} failed: {source}")]
    Run {
        optimizer: String,
        seed: u64,
        #[source]
        source: cglo::Error,
    },

    #[error(transparent)]
    Core(#[from] cglo::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        Self::Csv { path: path.to_path_buf(), source }
    }

    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::UnknownOptimizer(_) | Self::Environment(_) => 2,
            Self::Core(cglo::Error::Config(_)) => 2,
            Self::Run { source: cglo::Error::Config(_), .. } => 2,
            _ => 1,
        }
    }
}
