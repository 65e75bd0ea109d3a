use std::io;
use std::path::PathBuf;

use pfloc_core::{FilterError, PoseLogError, SegmentationError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot parse config: {0}")]
    ConfigSyntax(#[from] serde_json::Error),
    #[error("frame {frame}: {what}")]
    FrameMismatch { frame: u64, what: &'static str },
    #[error("{path}: {reason}")]
    BadData { path: PathBuf, reason: String },
    #[error("pose log: {0}")]
    PoseLog(#[from] PoseLogError),
    #[error("segmentation: {0}")]
    Segmentation(#[from] SegmentationError),
    #[error("filter: {0}")]
    Filter(#[from] FilterError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl HarnessError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn bad_data(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        HarnessError::BadData {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for bad input
    /// data, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::ConfigSyntax(_) => 2,
            HarnessError::FrameMismatch { .. }
            | HarnessError::BadData { .. }
            | HarnessError::PoseLog(_)
            | HarnessError::Segmentation(_) => 3,
            _ => 1,
        }
    }
}

impl From<pfloc_core::ConfigError> for HarnessError {
    fn from(e: pfloc_core::ConfigError) -> Self {
        match e {
            pfloc_core::ConfigError::Invalid { field, reason } => HarnessError::config(field, reason),
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, HarnessError>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, HarnessError> {
        self.map_err(|source| HarnessError::Io {
            path: path.into(),
            source,
        })
    }
}
