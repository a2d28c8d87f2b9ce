//! Brute-force reference implementations, written without the library's
//! helpers: pairwise loops, union-find labelling and explicit sorting.
#![allow(dead_code)]

use rand::Rng;
use strokeseg_volume::{BinaryMask, VoxelGrid};

pub fn voxels(m: &BinaryMask) -> Vec<[usize; 3]> {
    let g = m.grid();
    (0..g.len()).filter(|&i| m.get(i)).map(|i| g.coords(i)).collect()
}

pub fn dice(p: &BinaryMask, g: &BinaryMask) -> f64 {
    let (a, b) = (voxels(p), voxels(g));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let both = a.iter().filter(|v| b.contains(v)).count();
    2.0 * both as f64 / (a.len() + b.len()) as f64
}

pub fn avd(p: &BinaryMask, g: &BinaryMask) -> f64 {
    let s = g.grid().spacing();
    let ml = s[0] * s[1] * s[2] / 1000.0;
    (voxels(p).len() as f64 - voxels(g).len() as f64).abs() * ml
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        i = parent[i];
    }
    i
}

/// Component id per foreground voxel (index into `voxels(m)`), 26-adjacency.
pub fn components(m: &BinaryMask) -> (Vec<[usize; 3]>, Vec<usize>) {
    let v = voxels(m);
    let mut parent: Vec<usize> = (0..v.len()).collect();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let touching = (0..3).all(|k| v[i][k].abs_diff(v[j][k]) <= 1);
            if touching {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let roots: Vec<usize> = (0..v.len()).map(|i| find(&mut parent, i)).collect();
    (v, roots)
}

pub fn count_components(m: &BinaryMask) -> usize {
    let (_, roots) = components(m);
    let mut r = roots.clone();
    r.sort();
    r.dedup();
    r.len()
}

pub fn ald(p: &BinaryMask, g: &BinaryMask) -> usize {
    count_components(p).abs_diff(count_components(g))
}

/// (components hit, total components) of `m` against `other`.
fn hits(m: &BinaryMask, other: &BinaryMask) -> (usize, usize) {
    let (v, roots) = components(m);
    let mut all = roots.clone();
    all.sort();
    all.dedup();
    let hit = all.iter().filter(|&&r| (0..v.len()).any(|i| roots[i] == r && other.at(v[i][0], v[i][1], v[i][2]))).count();
    (hit, all.len())
}

pub fn f1(p: &BinaryMask, g: &BinaryMask) -> f64 {
    let (tp, ng) = hits(g, p);
    let (tp_pred, np) = hits(p, g);
    let (fp, fn_) = (np - tp_pred, ng - tp);
    if tp + fp + fn_ == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

fn dist(a: [usize; 3], b: [usize; 3], s: [f64; 3]) -> f64 {
    (0..3).map(|k| ((a[k] as f64 - b[k] as f64) * s[k]).powi(2)).sum::<f64>().sqrt()
}

fn q95(mut d: Vec<f64>) -> f64 {
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 0.95 * (d.len() as f64 - 1.0);
    let i = pos as usize;
    if i + 1 == d.len() {
        return d[i];
    }
    d[i] * (1.0 - (pos - i as f64)) + d[i + 1] * (pos - i as f64)
}

pub fn hd95(p: &BinaryMask, g: &BinaryMask) -> f64 {
    let (a, b) = (voxels(p), voxels(g));
    let s = g.grid().spacing();
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => {
            let sh = g.grid().shape();
            return ((sh[0] as f64 * s[0]).powi(2) + (sh[1] as f64 * s[1]).powi(2) + (sh[2] as f64 * s[2]).powi(2)).sqrt();
        }
        _ => {}
    }
    let directed = |x: &[[usize; 3]], y: &[[usize; 3]]| q95(x.iter().map(|&u| y.iter().map(|&w| dist(u, w, s)).fold(f64::INFINITY, f64::min)).collect());
    directed(&a, &b).max(directed(&b, &a))
}

pub fn precision_recall(p: &BinaryMask, g: &BinaryMask) -> (f64, f64) {
    let (a, b) = (voxels(p), voxels(g));
    let both = a.iter().filter(|v| b.contains(v)).count() as f64;
    let pr = if a.is_empty() { if b.is_empty() { 1.0 } else { 0.0 } } else { both / a.len() as f64 };
    let re = if b.is_empty() { if a.is_empty() { 1.0 } else { 0.0 } } else { both / b.len() as f64 };
    (pr, re)
}

/// A sparse random mask: a few random boxes plus scattered voxels, so that
/// pairs have several lesions, partial overlaps and occasional emptiness.
pub fn random_mask(grid: &VoxelGrid, rng: &mut impl Rng) -> BinaryMask {
    let sh = grid.shape();
    let mut on = vec![0u8; grid.len()];
    if rng.random_bool(0.05) {
        return BinaryMask::new(grid.clone(), on).unwrap();
    }
    for _ in 0..rng.random_range(0..4) {
        let lo: [usize; 3] = std::array::from_fn(|k| rng.random_range(0..sh[k]));
        let ext: [usize; 3] = std::array::from_fn(|_| rng.random_range(1..4));
        for z in lo[2]..(lo[2] + ext[2]).min(sh[2]) {
            for y in lo[1]..(lo[1] + ext[1]).min(sh[1]) {
                for x in lo[0]..(lo[0] + ext[0]).min(sh[0]) {
                    on[grid.index(x, y, z)] = 1;
                }
            }
        }
    }
    for _ in 0..rng.random_range(0..12) {
        on[rng.random_range(0..grid.len())] = 1;
    }
    BinaryMask::new(grid.clone(), on).unwrap()
}

/// 12³ grid with a random anisotropic spacing.
pub fn random_grid(rng: &mut impl Rng) -> VoxelGrid {
    let s: [f64; 3] = std::array::from_fn(|_| [0.5, 0.9, 1.0, 2.0, 6.0][rng.random_range(0..5)]);
    VoxelGrid::las([12, 12, 12], s).unwrap()
}
