//! Stand-in tools that honour the adapter contract, for tests and synthetic
//! runs where no real skull stripper or registration tool is installed.
//!
//! `<mode> [params] <in> <out> [<matrix>]`, with modes
//!
//! * `ones`: all-ones mask on the input grid
//! * `threshold T`: mask of voxels above T
//! * `fail`: writes a message to stderr and exits with status 3
//! * `identity`: input resampled onto the reference grid, identity matrix
//! * `translate X Y Z`: world translation (mm) applied, matrix written
//! * `scale S`: input copied, non-rigid matrix diag(S) written
//! * `grid-search R`: best integer-voxel translation within ±R voxels per
//!   axis by sum of squared differences to the reference
//!
//! Registration modes read the reference image from `$STROKESEG_REFERENCE`.

use std::path::Path;

use strokeseg_volume::linalg;
use strokeseg_volume::{load_volume, save_volume, BinaryMask, Volume};

use crate::adapter::REFERENCE_ENV;
use crate::resample::resample_volume;
use crate::transform::RigidTransform;

fn param(args: &[String], i: usize) -> Result<f64, String> {
    let s = args.get(i).ok_or("missing mode parameter")?;
    s.parse().map_err(|e| format!("parameter {s:?}: {e}"))
}

fn reference() -> Result<Volume, String> {
    let path = std::env::var(REFERENCE_ENV).map_err(|_| format!("{REFERENCE_ENV} is not set"))?;
    load_volume(&path).map_err(|e| e.to_string())
}

fn register(input: &Volume, t: &RigidTransform, out: &Path, matrix: Option<&String>) -> Result<(), String> {
    let reference = reference()?;
    let moved = resample_volume(input, reference.grid(), &t.inverse()).map_err(|e| e.to_string())?;
    save_volume(&moved, out).map_err(|e| e.to_string())?;
    let matrix = matrix.ok_or("registration mode needs a matrix path")?;
    t.write(Path::new(matrix)).map_err(|e| e.to_string())
}

fn grid_search(input: &Volume, radius: i64) -> Result<RigidTransform, String> {
    let reference = reference()?;
    let lin = reference.grid().affine();
    let mut best: Option<(f64, RigidTransform)> = None;
    for dz in -radius..=radius {
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let d = [dx as f64, dy as f64, dz as f64];
                let world: [f64; 3] = std::array::from_fn(|i| (0..3).map(|k| lin[i][k] * d[k]).sum());
                let t = RigidTransform::translation(world);
                let moved = resample_volume(input, reference.grid(), &t.inverse()).map_err(|e| e.to_string())?;
                let ssd: f64 = moved.data().iter().zip(reference.data()).map(|(a, b)| (a - b) * (a - b)).sum();
                if best.as_ref().is_none_or(|(s, _)| ssd < *s) {
                    best = Some((ssd, t));
                }
            }
        }
    }
    Ok(best.expect("search space is non-empty").1)
}

fn run(args: &[String]) -> Result<(), String> {
    let mode = args.first().ok_or("missing mode")?.as_str();
    let nparams = match mode {
        "ones" | "fail" | "identity" => 0,
        "threshold" | "scale" | "grid-search" => 1,
        "translate" => 3,
        other => return Err(format!("unknown mode {other:?}")),
    };
    if mode == "fail" {
        return Err("forced failure".into());
    }
    let files = &args[1 + nparams.min(args.len() - 1)..];
    let (input, out) = match files {
        [i, o, ..] => (i, Path::new(o)),
        _ => return Err("expected <in> <out> [<matrix>]".into()),
    };
    let matrix = files.get(2);
    let v = load_volume(input).map_err(|e| e.to_string())?;
    match mode {
        "ones" => save_volume(&BinaryMask::from_fn(v.grid().clone(), |_| true), out).map_err(|e| e.to_string()),
        "threshold" => {
            let t = param(args, 1)?;
            save_volume(&BinaryMask::from_volume(&v, |x| x > t), out).map_err(|e| e.to_string())
        }
        "identity" => register(&v, &RigidTransform::identity(), out, matrix),
        "translate" => {
            let t = RigidTransform::translation([param(args, 1)?, param(args, 2)?, param(args, 3)?]);
            register(&v, &t, out, matrix)
        }
        "scale" => {
            let s = param(args, 1)?;
            save_volume(&v, out).map_err(|e| e.to_string())?;
            let text: String = linalg::diag([s; 3]).iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ") + "\n").collect();
            std::fs::write(matrix.ok_or("missing matrix path")?, text).map_err(|e| e.to_string())
        }
        "grid-search" => {
            let t = grid_search(&v, param(args, 1)? as i64)?;
            register(&v, &t, out, matrix)
        }
        _ => unreachable!(),
    }
}

/// Entry point shared by the stub binary and the CLI; returns the exit code.
pub fn main(args: &[String]) -> i32 {
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("stub adapter: {e}");
            3
        }
    }
}
