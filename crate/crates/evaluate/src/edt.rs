//! Exact Euclidean distance transform on anisotropic grids.
//!
//! Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher), one
//! pass per axis with the axis spacing folded into the parabola positions.

use strokeseg_volume::BinaryMask;

/// Squared distance in mm² from every voxel centre to the nearest foreground
/// voxel of `mask`. All entries are `+inf` when the mask is empty.
pub fn squared_distance_mm2(mask: &BinaryMask) -> Vec<f64> {
    let grid = mask.grid();
    let shape = grid.shape();
    let spacing = grid.spacing();
    let mut d: Vec<f64> = mask.data().iter().map(|&v| if v != 0 { 0.0 } else { f64::INFINITY }).collect();
    let n = *shape.iter().max().unwrap_or(&0);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut scratch = Envelope::with_capacity(n);
    let stride = [1, shape[0], shape[0] * shape[1]];
    for axis in 0..3 {
        let len = shape[axis];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..shape[b] {
            for i in 0..shape[a] {
                let base = i * stride[a] + j * stride[b];
                for k in 0..len {
                    line[k] = d[base + k * stride[axis]];
                }
                scratch.transform(&line[..len], spacing[axis], &mut out[..len]);
                for k in 0..len {
                    d[base + k * stride[axis]] = out[k];
                }
            }
        }
    }
    d
}

/// Distance in mm from every voxel to the nearest foreground voxel.
pub fn distance_mm(mask: &BinaryMask) -> Vec<f64> {
    squared_distance_mm2(mask).into_iter().map(f64::sqrt).collect()
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self { v: Vec::with_capacity(n), z: Vec::with_capacity(n + 1) }
    }

    /// out[i] = min_q (i s - q s)² + f[q] over the finite samples of f.
    fn transform(&mut self, f: &[f64], s: f64, out: &mut [f64]) {
        self.v.clear();
        self.z.clear();
        let pos = |i: usize| i as f64 * s;
        for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
            if self.v.is_empty() {
                self.v.push(q);
                self.z.push(f64::NEG_INFINITY);
                continue;
            }
            loop {
                let p = *self.v.last().unwrap();
                let cross = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
                if cross <= *self.z.last().unwrap() && self.v.len() > 1 {
                    self.v.pop();
                    self.z.pop();
                } else {
                    self.v.push(q);
                    self.z.push(cross);
                    break;
                }
            }
        }
        if self.v.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let x = pos(i);
            while k + 1 < self.v.len() && self.z[k + 1] < x {
                k += 1;
            }
            let q = self.v[k];
            *o = (x - pos(q)) * (x - pos(q)) + f[q];
        }
    }
}
