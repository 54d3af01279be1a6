use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config {path}: {key}")]
    ConfigInvalid { path: PathBuf, key: String },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] wong_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    /// Process exit code: 2 for solver non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(wong_core::Error::NoConvergence { .. }) => 2,
            _ => 1,
        }
    }
}
