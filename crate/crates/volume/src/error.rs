use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VolumeError>;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("data length {got} does not match grid with {expected} voxels")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at voxel {index}")]
    NonFinite { index: usize },

    #[error("mask value {value} at voxel {index} is not 0 or 1")]
    NotBinary { index: usize, value: f64 },

    #[error("probability {value} at voxel {index} is outside [0, 1]")]
    NotProbability { index: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid NIfTI-1 file: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: expected a 3D image, header has {ndim} dimensions ({dims:?})")]
    NotThreeD { path: PathBuf, ndim: usize, dims: Vec<usize> },

    #[error("{path}: non-finite voxel value at index {index}")]
    NonFiniteFile { path: PathBuf, index: usize },

    #[error("duplicate case id {0}")]
    DuplicateId(String),

    #[error("cannot reorient: {0}")]
    Orientation(String),
}
