//! Voxel-wise error maps over a case set: FP/FN proportions and the mean
//! distance of FP (FN) voxels to the ground truth (prediction).

use strokeseg_volume::{BinaryMask, Volume, VoxelGrid};

use crate::edt::distance_mm;
use crate::error::{EvalError, Result};

pub const FWHM_MM: f64 = 4.0;
/// Smoothed proportions below this are zeroed.
pub const PROPORTION_FLOOR: f64 = 0.01;
/// Smoothed mean distances below this (mm) are zeroed.
pub const DISTANCE_FLOOR_MM: f64 = 0.2;
/// Kernel half-width in standard deviations.
pub const TRUNCATE_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelwiseMaps {
    pub fp_proportion: Volume,
    pub fn_proportion: Volume,
    pub fp_mean_hd: Volume,
    pub fn_mean_hd: Volume,
}

impl VoxelwiseMaps {
    /// File stems used when the maps are written out.
    pub const NAMES: [&'static str; 4] = ["fp_proportion", "fn_proportion", "fp_mean_hd", "fn_mean_hd"];

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Volume)> {
        Self::NAMES.into_iter().zip([&self.fp_proportion, &self.fn_proportion, &self.fp_mean_hd, &self.fn_mean_hd])
    }
}

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt())
}

/// Per-voxel distance to `target`, kept only where `keep` holds. An empty
/// target puts the grid diagonal on every kept voxel.
fn error_distances(keep: impl Fn(usize) -> bool, target: &BinaryMask) -> Vec<f64> {
    let d = distance_mm(target);
    let penalty = target.grid().diagonal_mm();
    (0..d.len())
        .map(|i| {
            if !keep(i) {
                0.0
            } else if d[i].is_finite() {
                d[i]
            } else {
                penalty
            }
        })
        .collect()
}

/// Case-averaged maps before smoothing and thresholding.
pub fn raw_maps(cases: &[(BinaryMask, BinaryMask)]) -> Result<VoxelwiseMaps> {
    let Some((first, _)) = cases.first() else {
        return Err(EvalError::Empty("no cases for voxel-wise maps"));
    };
    let grid = first.grid().clone();
    let n = grid.len();
    let mut acc = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (k, (pred, gt)) in cases.iter().enumerate() {
        for (what, m) in [("prediction", pred), ("ground truth", gt)] {
            if !m.grid().matches(&grid) {
                return Err(EvalError::GridMismatch(format!("{what} of case {k} is not on the common grid")));
            }
        }
        let fp = |i: usize| pred.get(i) && !gt.get(i);
        let fn_ = |i: usize| !pred.get(i) && gt.get(i);
        let fp_d = error_distances(fp, gt);
        let fn_d = error_distances(fn_, pred);
        for i in 0..n {
            acc[0][i] += f64::from(u8::from(fp(i)));
            acc[1][i] += f64::from(u8::from(fn_(i)));
            acc[2][i] += fp_d[i];
            acc[3][i] += fn_d[i];
        }
    }
    let k = cases.len() as f64;
    let [a, b, c, d] = acc.map(|v| v.into_iter().map(|x| x / k).collect::<Vec<_>>());
    Ok(VoxelwiseMaps {
        fp_proportion: Volume::new(grid.clone(), a)?,
        fn_proportion: Volume::new(grid.clone(), b)?,
        fp_mean_hd: Volume::new(grid.clone(), c)?,
        fn_mean_hd: Volume::new(grid, d)?,
    })
}

/// Index into `0..n` with mirror reflection about the edges (edge sample
/// repeated).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

fn kernel(sigma_vox: f64) -> Vec<f64> {
    let r = (TRUNCATE_SIGMAS * sigma_vox + 0.5) as isize;
    if r == 0 || sigma_vox <= 0.0 {
        return vec![1.0];
    }
    let w: Vec<f64> = (-r..=r).map(|k| (-0.5 * (k as f64 / sigma_vox).powi(2)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with an isotropic width `sigma_mm`, converted to
/// voxels per axis.
pub fn gaussian_smooth(v: &Volume, sigma_mm: f64) -> Result<Volume> {
    if !(sigma_mm >= 0.0 && sigma_mm.is_finite()) {
        return Err(EvalError::InvalidParameter(format!("sigma {sigma_mm} mm")));
    }
    let grid: &VoxelGrid = v.grid();
    let shape = grid.shape();
    let spacing = grid.spacing();
    let stride = [1, shape[0], shape[0] * shape[1]];
    let mut data = v.data().to_vec();
    let mut line = Vec::new();
    for axis in 0..3 {
        let w = kernel(sigma_mm / spacing[axis]);
        if w.len() == 1 {
            continue;
        }
        let r = (w.len() / 2) as isize;
        let len = shape[axis];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..shape[b] {
            for i in 0..shape[a] {
                let base = i * stride[a] + j * stride[b];
                line.clear();
                line.extend((0..len).map(|k| data[base + k * stride[axis]]));
                for k in 0..len {
                    let mut s = 0.0;
                    for (t, wt) in w.iter().enumerate() {
                        s += wt * line[reflect(k as isize + t as isize - r, len)];
                    }
                    data[base + k * stride[axis]] = s;
                }
            }
        }
    }
    Ok(Volume::new(grid.clone(), data)?)
}

fn smooth_and_floor(v: &Volume, floor: f64) -> Result<Volume> {
    let s = gaussian_smooth(v, fwhm_to_sigma(FWHM_MM))?;
    Ok(s.map(|_, x| if x < floor { 0.0 } else { x })?)
}

/// Smoothed and thresholded maps over `(prediction, ground truth)` pairs.
pub fn voxelwise_maps(cases: &[(BinaryMask, BinaryMask)]) -> Result<VoxelwiseMaps> {
    let raw = raw_maps(cases)?;
    Ok(VoxelwiseMaps {
        fp_proportion: smooth_and_floor(&raw.fp_proportion, PROPORTION_FLOOR)?,
        fn_proportion: smooth_and_floor(&raw.fn_proportion, PROPORTION_FLOOR)?,
        fp_mean_hd: smooth_and_floor(&raw.fp_mean_hd, DISTANCE_FLOOR_MM)?,
        fn_mean_hd: smooth_and_floor(&raw.fn_mean_hd, DISTANCE_FLOOR_MM)?,
    })
}
