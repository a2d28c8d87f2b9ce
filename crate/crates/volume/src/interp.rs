//! Point sampling on voxel arrays (first axis fastest). Positions are in
//! continuous voxel coordinates; everything outside the lattice reads as 0.

/// Trilinear interpolation. Integer positions return the stored value exactly.
pub fn trilinear(data: &[f64], shape: [usize; 3], p: [f64; 3]) -> f64 {
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        if !(p[a] > -1.0 && p[a] < shape[a] as f64) {
            return 0.0;
        }
        let f = p[a].floor();
        base[a] = f as i64;
        frac[a] = p[a] - f;
    }
    let read = |x: i64, y: i64, z: i64| -> f64 {
        if x < 0 || y < 0 || z < 0 || x >= shape[0] as i64 || y >= shape[1] as i64 || z >= shape[2] as i64 {
            0.0
        } else {
            data[x as usize + shape[0] * (y as usize + shape[1] * z as usize)]
        }
    };
    let mut acc = 0.0;
    for dz in 0..2 {
        let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
        if wz == 0.0 {
            continue;
        }
        for dy in 0..2 {
            let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
            if wy == 0.0 {
                continue;
            }
            for dx in 0..2 {
                let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
                if wx == 0.0 {
                    continue;
                }
                acc += wx * wy * wz * read(base[0] + dx, base[1] + dy, base[2] + dz);
            }
        }
    }
    acc
}

/// Index of the nearest voxel (round half away from zero), or `None` outside.
pub fn nearest_index(shape: [usize; 3], p: [f64; 3]) -> Option<usize> {
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let r = p[a].round();
        if !(r >= 0.0 && r < shape[a] as f64) {
            return None;
        }
        idx[a] = r as usize;
    }
    Some(idx[0] + shape[0] * (idx[1] + shape[1] * idx[2]))
}
