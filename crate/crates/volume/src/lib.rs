//! Canonical volume, mask and case types shared by every other crate, plus
//! NIfTI-1 file I/O.
//!
//! Spatial data is stored with the first (left-right) axis varying fastest,
//! which is also the on-disk NIfTI order: voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`.

pub mod case;
pub mod error;
pub mod grid;
pub mod interp;
pub mod linalg;
pub mod nifti;
pub mod orient;
pub mod volume;

pub use case::{CaseRecord, Domain};
pub use error::{Result, VolumeError};
pub use grid::{voxel_volume_ml, VoxelGrid};
pub use linalg::Mat4;
pub use nifti::{load_mask, load_probability, load_volume, load_volume_las, save_volume, NiftiImage};
pub use volume::{BinaryMask, ProbabilityMap, Volume};
