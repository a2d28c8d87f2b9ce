//! Connected-component labelling of binary masks.

use std::collections::VecDeque;

use strokeseg_volume::BinaryMask;

/// Voxel adjacency used to decide which foreground voxels belong together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Faces and edges.
    Eighteen,
    /// Faces, edges and corners.
    #[default]
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let order = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => order == 1,
                        Connectivity::Eighteen => order == 1 || order == 2,
                        Connectivity::TwentySix => order > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Labelled components of one mask. Label 0 is background; lesions are
/// numbered 1..=count in the order their first voxel is met in a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionComponents {
    pub labels: Vec<u32>,
    /// Voxel count of component `k + 1`.
    pub sizes: Vec<usize>,
    /// Volume of component `k + 1` in ml.
    pub volumes_ml: Vec<f64>,
}

impl LesionComponents {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

pub fn connected_components(mask: &BinaryMask) -> LesionComponents {
    connected_components_with(mask, Connectivity::default())
}

pub fn connected_components_with(mask: &BinaryMask, connectivity: Connectivity) -> LesionComponents {
    let grid = mask.grid();
    let [nx, ny, nz] = grid.shape();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; grid.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !mask.get(start) || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let [x, y, z] = grid.coords(i);
            for o in &offsets {
                let (qx, qy, qz) = (x as isize + o[0], y as isize + o[1], z as isize + o[2]);
                if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize || qz >= nz as isize {
                    continue;
                }
                let j = grid.index(qx as usize, qy as usize, qz as usize);
                if mask.get(j) && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    let ml = grid.voxel_volume_ml();
    let volumes_ml = sizes.iter().map(|&s| s as f64 * ml).collect();
    LesionComponents { labels, sizes, volumes_ml }
}
