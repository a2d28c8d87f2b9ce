//! Skull stripping, registration to the reference grid, z-scoring, and the
//! inverse mapping of predictions back to native space.

use std::path::Path;

use strokeseg_volume::{load_mask, load_volume, save_volume, BinaryMask, CaseRecord, Volume, VoxelGrid};

use crate::adapter::{Adapter, REFERENCE_ENV};
use crate::error::{PreprocessError, Result};
use crate::resample::{resample_mask, resample_volume};
use crate::transform::RigidTransform;

pub const CLIP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessResult {
    pub dwi_norm: Volume,
    pub adc_norm: Volume,
    pub brain_mask: BinaryMask,
    pub transform: RigidTransform,
    pub native_grid: VoxelGrid,
    /// Ground truth carried onto the reference grid, when the case has one.
    pub label: Option<BinaryMask>,
}

#[derive(Debug, Clone)]
pub struct Tools {
    pub skull_strip: Adapter,
    pub register: Adapter,
}

fn scratch() -> Result<tempfile::TempDir> {
    tempfile::Builder::new().prefix("strokeseg-").tempdir().map_err(|source| PreprocessError::Io { path: std::env::temp_dir(), source })
}

fn output_error(tool: &Adapter, reason: impl ToString) -> PreprocessError {
    PreprocessError::AdapterOutput { tool: tool.describe(), reason: reason.to_string() }
}

pub fn skull_strip(dwi: &Volume, tool: &Adapter) -> Result<BinaryMask> {
    let dir = scratch()?;
    let (input, output) = (dir.path().join("dwi.nii.gz"), dir.path().join("brain.nii.gz"));
    save_volume(dwi, &input)?;
    tool.run(&[&input, &output], &[])?;
    let mask = load_mask(&output).map_err(|e| output_error(tool, e))?;
    if !mask.grid().matches(dwi.grid()) {
        return Err(output_error(tool, "brain mask is not on the DWI grid"));
    }
    if mask.is_empty() {
        return Err(PreprocessError::EmptyMask);
    }
    // re-attach the exact input grid; the file round trip stores it in single precision
    Ok(BinaryMask::new(dwi.grid().clone(), mask.data().to_vec())?)
}

/// Registers `dwi` onto the grid of `reference`. The returned transform maps
/// native world coordinates to reference world coordinates.
pub fn register_to_reference(dwi: &Volume, reference: &Volume, tool: &Adapter) -> Result<(Volume, RigidTransform)> {
    let dir = scratch()?;
    let p = |n: &str| dir.path().join(n);
    let (input, output, matrix, refpath) = (p("moving.nii.gz"), p("registered.nii.gz"), p("matrix.txt"), p("reference.nii.gz"));
    save_volume(dwi, &input)?;
    save_volume(reference, &refpath)?;
    tool.run(&[&input, &output, &matrix], &[(REFERENCE_ENV, refpath.as_path())])?;
    let moved = load_volume(&output).map_err(|e| output_error(tool, e))?;
    if !moved.grid().matches(reference.grid()) {
        return Err(output_error(tool, format!("registered image has shape {:?}, reference {:?}", moved.grid().shape(), reference.grid().shape())));
    }
    let transform = RigidTransform::read(&matrix)?;
    Ok((Volume::new(reference.grid().clone(), moved.into_data())?, transform))
}

/// Z-scores `v` with the in-brain mean and population standard deviation,
/// clips to [-5, 5] and zeroes everything outside the brain.
pub fn normalize_zscore_clip(v: &Volume, brain: &BinaryMask) -> Result<Volume> {
    v.grid().ensure_matches(brain.grid(), "brain mask vs image")?;
    let inside: Vec<f64> = (0..v.data().len()).filter(|&i| brain.get(i)).map(|i| v.data()[i]).collect();
    if inside.is_empty() {
        return Err(PreprocessError::EmptyMask);
    }
    let n = inside.len() as f64;
    let mean = inside.iter().sum::<f64>() / n;
    let var = inside.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) || !(sd / mean.abs().max(1.0) > 1e-12) {
        return Err(PreprocessError::ZeroVariance);
    }
    Ok(v.map(|i, x| if brain.get(i) { ((x - mean) / sd).clamp(-CLIP, CLIP) } else { 0.0 })?)
}

/// Nearest-neighbour resampling of a reference-grid mask onto the native grid.
pub fn map_mask_to_native(mask: &BinaryMask, transform: &RigidTransform, native: &VoxelGrid) -> BinaryMask {
    resample_mask(mask, native, transform)
}

/// Nearest-neighbour resampling of a native mask onto the reference grid.
pub fn map_mask_to_reference(mask: &BinaryMask, transform: &RigidTransform, reference: &VoxelGrid) -> BinaryMask {
    resample_mask(mask, reference, &transform.inverse())
}

/// The full chain for one case: brain mask from the native DWI, registration
/// of the skull-stripped DWI, ADC and masks carried along with the same
/// transform, then per-channel normalisation inside the brain.
pub fn preprocess_case(case: &CaseRecord, reference: &Volume, tools: &Tools) -> Result<PreprocessResult> {
    let native_grid = case.grid().clone();
    let brain_native = skull_strip(&case.dwi, &tools.skull_strip)?;
    let stripped = case.dwi.map(|i, v| if brain_native.get(i) { v } else { 0.0 })?;
    let (dwi_ref, transform) = register_to_reference(&stripped, reference, &tools.register)?;
    let grid = reference.grid();
    let adc_ref = resample_volume(&case.adc, grid, &transform.inverse())?;
    let brain_mask = map_mask_to_reference(&brain_native, &transform, grid);
    let label = case.label.as_ref().map(|l| map_mask_to_reference(l, &transform, grid));
    Ok(PreprocessResult {
        dwi_norm: normalize_zscore_clip(&dwi_ref, &brain_mask)?,
        adc_norm: normalize_zscore_clip(&adc_ref, &brain_mask)?,
        brain_mask,
        transform,
        native_grid,
        label,
    })
}

/// All-zero volume on `grid`, standing in for the reference DWI when only its
/// grid matters.
pub fn blank_reference(grid: &VoxelGrid) -> Volume {
    Volume::zeros(grid.clone())
}

/// Writes the per-case artifacts into `dir` as `<id>_dwi.nii.gz`,
/// `<id>_adc.nii.gz`, `<id>_brain.nii.gz`, `<id>_label.nii.gz` (if any) and
/// `<id>_transform.txt`.
pub fn write_result(result: &PreprocessResult, id: &str, dir: &Path) -> Result<()> {
    save_volume(&result.dwi_norm, dir.join(format!("{id}_dwi.nii.gz")))?;
    save_volume(&result.adc_norm, dir.join(format!("{id}_adc.nii.gz")))?;
    save_volume(&result.brain_mask, dir.join(format!("{id}_brain.nii.gz")))?;
    if let Some(l) = &result.label {
        save_volume(l, dir.join(format!("{id}_label.nii.gz")))?;
    }
    result.transform.write(&dir.join(format!("{id}_transform.txt")))
}
