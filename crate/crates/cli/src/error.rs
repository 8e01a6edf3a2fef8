use std::path::PathBuf;

use pcskel_core::comb::CombError;
use pcskel_core::orient::OrientError;
use pcskel_core::stats::StatsError;
use pcskel_core::{GraphError, SkeletonError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 0 success, 1 usage, 2 data (including I/O), 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::InvalidConfig(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::ZeroVariance { .. } | StatsError::TooFewSamples(_) => CliError::Data(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<CombError> for CliError {
    fn from(e: CombError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<SkeletonError> for CliError {
    fn from(e: SkeletonError) -> Self {
        match e {
            SkeletonError::Config(g) => g.into(),
            SkeletonError::Stats(s) => s.into(),
            SkeletonError::Comb(c) => c.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<OrientError> for CliError {
    fn from(e: OrientError) -> Self {
        CliError::Data(e.to_string())
    }
}
