//! Axis permutation/flip normalization to LAS (+x toward the subject's left,
//! +y anterior, +z superior) derived from the affine.

use crate::error::{Result, VolumeError};
use crate::grid::VoxelGrid;
use crate::linalg::{self, Mat4};
use crate::volume::{BinaryMask, Volume};

/// Output axis `t` reads source axis `perm[t]`, reversed when `flip[t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reorientation {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

impl Reorientation {
    pub fn is_identity(&self) -> bool {
        self.perm == [0, 1, 2] && self.flip == [false; 3]
    }
}

/// World direction sign that each LAS voxel axis must follow.
const LAS_SIGNS: [f64; 3] = [-1.0, 1.0, 1.0];

pub fn las_reorientation(affine: &Mat4) -> Result<Reorientation> {
    let mut perm = [usize::MAX; 3];
    let mut flip = [false; 3];
    for src in 0..3 {
        let col = [affine[0][src], affine[1][src], affine[2][src]];
        let world = (0..3).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs())).unwrap();
        if perm[world] != usize::MAX {
            return Err(VolumeError::Orientation(format!(
                "voxel axes {} and {src} both align with world axis {world}",
                perm[world]
            )));
        }
        perm[world] = src;
        flip[world] = col[world] * LAS_SIGNS[world] < 0.0;
    }
    Ok(Reorientation { perm, flip })
}

/// Applies `r` to a grid, returning the new grid.
pub fn reorient_grid(grid: &VoxelGrid, r: &Reorientation) -> Result<VoxelGrid> {
    let src_shape = grid.shape();
    let shape = [src_shape[r.perm[0]], src_shape[r.perm[1]], src_shape[r.perm[2]]];
    // Maps new voxel index -> old voxel index.
    let mut m = [[0.0; 4]; 4];
    m[3][3] = 1.0;
    for t in 0..3 {
        let s = r.perm[t];
        if r.flip[t] {
            m[s][t] = -1.0;
            m[s][3] = (src_shape[s] - 1) as f64;
        } else {
            m[s][t] = 1.0;
        }
    }
    VoxelGrid::new(shape, linalg::mul(grid.affine(), &m))
}

fn reorient_data<T: Copy>(grid: &VoxelGrid, data: &[T], r: &Reorientation) -> Vec<T> {
    let src_shape = grid.shape();
    let shape = [src_shape[r.perm[0]], src_shape[r.perm[1]], src_shape[r.perm[2]]];
    let mut out = Vec::with_capacity(data.len());
    let mut src = [0usize; 3];
    for z in 0..shape[2] {
        for y in 0..shape[1] {
            for x in 0..shape[0] {
                for (t, v) in [x, y, z].into_iter().enumerate() {
                    let s = r.perm[t];
                    src[s] = if r.flip[t] { src_shape[s] - 1 - v } else { v };
                }
                out.push(data[grid.index(src[0], src[1], src[2])]);
            }
        }
    }
    out
}

pub fn volume_to_las(v: &Volume) -> Result<Volume> {
    let r = las_reorientation(v.grid().affine())?;
    if r.is_identity() {
        return Ok(v.clone());
    }
    Volume::new(reorient_grid(v.grid(), &r)?, reorient_data(v.grid(), v.data(), &r))
}

pub fn mask_to_las(m: &BinaryMask) -> Result<BinaryMask> {
    let r = las_reorientation(m.grid().affine())?;
    if r.is_identity() {
        return Ok(m.clone());
    }
    BinaryMask::new(reorient_grid(m.grid(), &r)?, reorient_data(m.grid(), m.data(), &r))
}
