use std::path::PathBuf;

use strokeseg_volume::VolumeError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Volume(#[from] VolumeError),

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("could not place lesion {lesion} of case {case:?} after {attempts} attempts")]
    Placement { case: String, lesion: usize, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid manifest: {reason}")]
    Manifest { path: PathBuf, reason: String },
}
