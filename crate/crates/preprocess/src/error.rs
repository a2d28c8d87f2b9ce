use std::path::PathBuf;

use strokeseg_volume::VolumeError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, PreprocessError>;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error(transparent)]
    Volume(#[from] VolumeError),

    #[error("adapter {tool:?} could not be started: {source}")]
    AdapterMissing {
        tool: String,
        #[source]
        source: std::io::Error,
    },

    #[error("adapter {tool:?} failed ({status}): {stderr}")]
    AdapterFailure { tool: String, status: String, stderr: String },

    #[error("adapter {tool:?} produced unusable output: {reason}")]
    AdapterOutput { tool: String, reason: String },

    #[error("transform is not rigid: {0}")]
    NotRigid(String),

    #[error("{path}: invalid matrix file: {reason}")]
    MatrixFormat { path: PathBuf, reason: String },

    #[error("brain mask is empty")]
    EmptyMask,

    #[error("zero intensity variance inside the brain mask")]
    ZeroVariance,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
