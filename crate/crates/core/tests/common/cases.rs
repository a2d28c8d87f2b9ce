//! Small hand-built cases: a bright/dark blob pair on a tiny LAS grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strokeseg_volume::{BinaryMask, CaseRecord, Domain, Volume, VoxelGrid};

pub const SHAPE: [usize; 3] = [16, 16, 4];

pub fn grid() -> VoxelGrid {
    VoxelGrid::las(SHAPE, [3.6, 3.6, 24.0]).unwrap()
}

/// Ellipsoidal lesion at a seeded position: DWI bright, ADC dark, plus noise.
pub fn blob_case(id: &str, seed: u64, domain: Domain) -> CaseRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = grid();
    let c = [rng.random_range(5.0..11.0), rng.random_range(5.0..11.0), rng.random_range(1.0..3.0)];
    let r = [rng.random_range(2.0..3.5), rng.random_range(2.0..3.5), 1.2];
    let inside = |p: [usize; 3]| (0..3).map(|a| ((p[a] as f64 - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0;
    let label = BinaryMask::from_fn(g.clone(), inside);
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let dwi = Volume::from_fn(g.clone(), |p| if inside(p) { 2.0 } else { 0.0 } + noise.random_range(-0.3..0.3)).unwrap();
    let adc = Volume::from_fn(g.clone(), |p| if inside(p) { -1.5 } else { 0.5 } + noise.random_range(-0.3..0.3)).unwrap();
    let label = if domain == Domain::Source { Some(label) } else { None };
    CaseRecord::new(id, dwi, adc, label, domain).unwrap()
}

pub fn source_set(n: usize, seed: u64) -> Vec<CaseRecord> {
    (0..n).map(|i| blob_case(&format!("s{i}"), seed + i as u64, Domain::Source)).collect()
}

pub fn target_set(n: usize, seed: u64) -> Vec<CaseRecord> {
    (0..n).map(|i| blob_case(&format!("t{i}"), seed + 1000 + i as u64, Domain::Target)).collect()
}
