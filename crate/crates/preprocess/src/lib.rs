//! Preprocessing onto the common reference grid: brain extraction and rigid
//! registration through external tools, per-channel z-scoring, and mapping
//! of predicted masks back to each case's native space.

pub mod adapter;
pub mod error;
pub mod pipeline;
pub mod resample;
pub mod stub;
pub mod transform;

pub use adapter::{Adapter, REFERENCE_ENV};
pub use error::{PreprocessError, Result};
pub use pipeline::{
    blank_reference, map_mask_to_native, map_mask_to_reference, normalize_zscore_clip, preprocess_case, register_to_reference, skull_strip, write_result,
    PreprocessResult, Tools,
};
pub use transform::RigidTransform;
