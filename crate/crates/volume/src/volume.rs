use crate::error::{Result, VolumeError};
use crate::grid::VoxelGrid;

/// Real-valued scalar image (DWI, ADC, distance maps, ...). Always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: VoxelGrid,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(grid: VoxelGrid, data: Vec<f64>) -> Result<Self> {
        check_len(&grid, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite { index });
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: VoxelGrid) -> Self {
        let data = vec![0.0; grid.len()];
        Self { grid, data }
    }

    pub fn from_fn(grid: VoxelGrid, mut f: impl FnMut([usize; 3]) -> f64) -> Result<Self> {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Same grid, new values; the closure sees `(index, old value)`.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let data = self.data.iter().enumerate().map(|(i, &v)| f(i, v)).collect();
        Self::new(self.grid.clone(), data)
    }
}

/// Binary segmentation with values exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    grid: VoxelGrid,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(grid: VoxelGrid, data: Vec<u8>) -> Result<Self> {
        check_len(&grid, data.len())?;
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(VolumeError::NotBinary { index, value: data[index] as f64 });
        }
        Ok(Self { grid, data })
    }

    pub fn empty(grid: VoxelGrid) -> Self {
        let data = vec![0; grid.len()];
        Self { grid, data }
    }

    pub fn from_fn(grid: VoxelGrid, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i)) as u8).collect();
        Self { grid, data }
    }

    /// Mask of voxels where `pred` holds for the volume value.
    pub fn from_volume(v: &Volume, pred: impl Fn(f64) -> bool) -> Self {
        let data = v.data().iter().map(|&x| pred(x) as u8).collect();
        Self { grid: v.grid().clone(), data }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, index: usize) -> bool {
        self.data[index] != 0
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Lesion volume in ml.
    pub fn volume_ml(&self) -> f64 {
        self.count() as f64 * self.grid.voxel_volume_ml()
    }

    pub fn to_volume(&self) -> Volume {
        Volume { grid: self.grid.clone(), data: self.data.iter().map(|&v| v as f64).collect() }
    }
}

/// Per-voxel lesion probability in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    grid: VoxelGrid,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(grid: VoxelGrid, data: Vec<f64>) -> Result<Self> {
        check_len(&grid, data.len())?;
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(VolumeError::NotProbability { index, value: data[index] });
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Binarize with the `p >= threshold` convention.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        let data = self.data.iter().map(|&p| (p >= threshold) as u8).collect();
        BinaryMask { grid: self.grid.clone(), data }
    }
}

fn check_len(grid: &VoxelGrid, got: usize) -> Result<()> {
    if grid.len() != got {
        return Err(VolumeError::LengthMismatch { expected: grid.len(), got });
    }
    Ok(())
}
