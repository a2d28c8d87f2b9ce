#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use strokeseg_volume::{save_volume, BinaryMask, VoxelGrid};

pub const EXE: &str = env!("CARGO_BIN_EXE_strokeseg");

pub fn strokeseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(EXE).current_dir(dir).args(args).output().expect("binary runs")
}

/// Runs and asserts exit status 0, returning stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = strokeseg(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub fn stub(mode: &str) -> String {
    format!("{EXE} adapter-stub {mode}")
}

/// A downsized StdUNet with deep supervision and SE_AGs.
pub const TINY_CONFIG: &str = r#"
[network]
block = "StdUNet"
attention = "SE_AGs"
deep_supervision = true
encoder_filters = [8, 8, 16, 16, 16]
bottleneck_filters = 16
gn_groups = 4

[train]
epochs = 2
batch_size = 2
seed = 4

[train.augmentation]
max_translation = [2.5, 3.0, 0.5]

[mean_teacher]
rampup_epochs = 1
"#;

pub fn grid() -> VoxelGrid {
    VoxelGrid::las([12, 12, 4], [2.0, 2.0, 4.0]).unwrap()
}

pub fn write_mask(dir: &Path, name: &str, f: impl FnMut([usize; 3]) -> bool) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(name);
    save_volume(&BinaryMask::from_fn(grid(), f), &path).unwrap();
    path
}

pub fn cube(c: [usize; 3], r: usize) -> impl Fn([usize; 3]) -> bool {
    move |p| (0..3).all(|k| p[k].abs_diff(c[k]) <= r)
}

/// Three ground-truth cases with one or two cubic lesions each.
pub fn ground_truth(dir: &Path) {
    write_mask(dir, "c1.nii.gz", cube([4, 4, 1], 2));
    write_mask(dir, "c2.nii.gz", |p| cube([3, 3, 2], 1)(p) || cube([9, 9, 2], 1)(p));
    write_mask(dir, "c3.nii.gz", cube([7, 6, 2], 2));
}
