//! Resampling between grids under a rigid world transform.

use strokeseg_volume::interp::{nearest_index, trilinear};
use strokeseg_volume::linalg::{self, Mat4};
use strokeseg_volume::{BinaryMask, Result, Volume, VoxelGrid};

use crate::transform::RigidTransform;

/// Coordinates this close to a lattice point are read at the lattice point,
/// so grid-aligned motions copy values exactly.
const SNAP: f64 = 1e-9;

/// Target voxel -> source voxel for a world map `target world -> source world`.
fn voxel_map(source: &VoxelGrid, target: &VoxelGrid, world: &Mat4) -> Mat4 {
    linalg::mul(&source.world_to_voxel_matrix(), &linalg::mul(world, target.affine()))
}

fn source_position(m: &Mat4, c: [usize; 3]) -> [f64; 3] {
    linalg::apply(m, c.map(|v| v as f64)).map(|p| if (p - p.round()).abs() < SNAP { p.round() } else { p })
}

/// Pulls `v` onto `target`, where `world` maps target world to source world.
/// Outside the source reads 0.
pub fn resample_volume(v: &Volume, target: &VoxelGrid, world: &RigidTransform) -> Result<Volume> {
    let m = voxel_map(v.grid(), target, world.matrix());
    let shape = v.grid().shape();
    Volume::from_fn(target.clone(), |c| trilinear(v.data(), shape, source_position(&m, c)))
}

/// Nearest-neighbour counterpart of [`resample_volume`] for masks.
pub fn resample_mask(mask: &BinaryMask, target: &VoxelGrid, world: &RigidTransform) -> BinaryMask {
    let m = voxel_map(mask.grid(), target, world.matrix());
    let shape = mask.grid().shape();
    BinaryMask::from_fn(target.clone(), |c| nearest_index(shape, source_position(&m, c)).is_some_and(|i| mask.get(i)))
}
