use serde::{Deserialize, Serialize};

use crate::error::{Result, VolumeError};
use crate::linalg::{self, Mat4};

/// Tolerance (mm) for comparing spacings and affines.
pub const GRID_TOL: f64 = 1e-4;

/// Shape of the registration reference grid (LR x AP x IS).
pub const REFERENCE_SHAPE: [usize; 3] = [192, 224, 32];
/// Voxel size of the registration reference grid in mm.
pub const REFERENCE_SPACING: [f64; 3] = [0.9, 0.9, 6.0];

/// A voxel lattice placed in world space.
///
/// Axis order is (left-right, anterior-posterior, inferior-superior). The
/// spacing is always the column norms of the affine's linear part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    shape: [usize; 3],
    spacing: [f64; 3],
    affine: Mat4,
}

impl VoxelGrid {
    pub fn new(shape: [usize; 3], affine: Mat4) -> Result<Self> {
        if shape.contains(&0) {
            return Err(VolumeError::InvalidGrid(format!("shape {shape:?} has a zero extent")));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(VolumeError::InvalidGrid("affine has non-finite entries".into()));
        }
        if linalg::det3(&affine).abs() < 1e-12 || linalg::inverse(&affine).is_none() {
            return Err(VolumeError::InvalidGrid("affine is singular".into()));
        }
        let spacing = linalg::column_norms(&affine);
        Ok(Self { shape, spacing, affine })
    }

    /// Validating constructor for callers that also carry an explicit spacing.
    pub fn with_spacing(shape: [usize; 3], spacing: [f64; 3], affine: Mat4) -> Result<Self> {
        let grid = Self::new(shape, affine)?;
        for i in 0..3 {
            if !(spacing[i] > 0.0) || (grid.spacing[i] - spacing[i]).abs() > GRID_TOL {
                return Err(VolumeError::InvalidGrid(format!(
                    "spacing {spacing:?} disagrees with affine column norms {:?}",
                    grid.spacing
                )));
            }
        }
        Ok(grid)
    }

    /// LAS-oriented grid (first axis points to the subject's left) whose
    /// centre sits at the world origin.
    pub fn las(shape: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeError::InvalidGrid(format!("spacing {spacing:?} must be positive")));
        }
        let mut affine = linalg::diag([-spacing[0], spacing[1], spacing[2]]);
        let centre = [
            (shape[0] as f64 - 1.0) / 2.0,
            (shape[1] as f64 - 1.0) / 2.0,
            (shape[2] as f64 - 1.0) / 2.0,
        ];
        let mapped = linalg::apply(&affine, centre);
        for i in 0..3 {
            affine[i][3] = -mapped[i];
        }
        Self::new(shape, affine)
    }

    /// The 192 x 224 x 32 LAS reference grid at 0.9 x 0.9 x 6.0 mm.
    pub fn reference() -> Self {
        Self::las(REFERENCE_SHAPE, REFERENCE_SPACING).expect("reference grid is valid")
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Mat4 {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.shape[0];
        let rest = index / self.shape[0];
        [x, rest % self.shape[1], rest / self.shape[1]]
    }

    pub fn voxel_to_world(&self, v: [f64; 3]) -> [f64; 3] {
        linalg::apply(&self.affine, v)
    }

    pub fn world_to_voxel_matrix(&self) -> Mat4 {
        linalg::inverse(&self.affine).expect("grid affine is invertible")
    }

    /// Same shape and an affine equal within [`GRID_TOL`].
    pub fn matches(&self, other: &VoxelGrid) -> bool {
        self.shape == other.shape && linalg::max_abs_diff(&self.affine, &other.affine) <= GRID_TOL
    }

    pub fn ensure_matches(&self, other: &VoxelGrid, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(VolumeError::GridMismatch(format!(
                "{what}: shape {:?} vs {:?}",
                self.shape, other.shape
            )))
        }
    }

    /// Volume of one voxel in millilitres.
    pub fn voxel_volume_ml(&self) -> f64 {
        voxel_volume_ml(self)
    }

    /// Length of the grid's world-space extent diagonal in mm.
    pub fn diagonal_mm(&self) -> f64 {
        (0..3)
            .map(|i| {
                let e = self.shape[i] as f64 * self.spacing[i];
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Product of the voxel spacing in mm^3, converted to ml.
pub fn voxel_volume_ml(grid: &VoxelGrid) -> f64 {
    grid.spacing.iter().product::<f64>() / 1000.0
}
