use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no torus wrap scheme for a cluster of {0} cells")]
    UnsupportedClusterSize(usize),

    #[error("point coincides with the array position")]
    DegeneratePosition,

    #[error("exclusion disks leave no admissible area in cell {cell}")]
    ExclusionTooLarge { cell: usize },

    #[error("distance must be positive, got {0} km")]
    NonpositiveDistance(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("empty input")]
    EmptyInput,

    #[error("solver failed on every drop ({0} drops)")]
    AllDropsFailed(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::UnsupportedClusterSize(_) | Error::ExclusionTooLarge { .. } => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
