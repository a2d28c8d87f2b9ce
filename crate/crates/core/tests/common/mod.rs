//! Direct per-voxel definitions of the network's building blocks, used as
//! references for the optimised kernels.
#![allow(dead_code)]

pub mod cases;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strokeseg_autograd::{Dims, Tensor};

pub type Params = BTreeMap<String, Tensor>;

/// Simple owned field indexed `[n][c][x][y][z]`.
#[derive(Clone, Debug)]
pub struct Field {
    pub n: usize,
    pub c: usize,
    pub sp: [usize; 3],
    pub v: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize, c: usize, sp: [usize; 3]) -> Self {
        Self { n, c, sp, v: vec![0.0; n * c * sp[0] * sp[1] * sp[2]] }
    }

    fn idx(&self, n: usize, c: usize, x: usize, y: usize, z: usize) -> usize {
        (((n * self.c + c) * self.sp[2] + z) * self.sp[1] + y) * self.sp[0] + x
    }

    pub fn get(&self, n: usize, c: usize, x: usize, y: usize, z: usize) -> f64 {
        self.v[self.idx(n, c, x, y, z)]
    }

    pub fn set(&mut self, n: usize, c: usize, x: usize, y: usize, z: usize, val: f64) {
        let i = self.idx(n, c, x, y, z);
        self.v[i] = val;
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let d = t.dims();
        Self { n: d.n, c: d.c, sp: d.sp, v: t.data().to_vec() }
    }

    pub fn tensor(&self) -> Tensor {
        Tensor::new(Dims::new(self.n, self.c, self.sp), self.v.clone()).unwrap()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { v: self.v.iter().map(|&a| f(a)).collect(), ..self.clone() }
    }

    pub fn voxels(&self) -> impl Iterator<Item = (usize, usize, usize)> {
        let [nx, ny, nz] = self.sp;
        (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| (x, y, z))))
    }
}

pub fn random_tensor(d: Dims, rng: &mut ChaCha8Rng, scale: f64) -> Tensor {
    Tensor::new(d, (0..d.numel()).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convolution with explicit low padding `lo` and output size `out`.
pub fn conv(x: &Field, w: &Tensor, b: Option<&Tensor>, stride: [usize; 3], lo: [usize; 3], out: [usize; 3]) -> Field {
    let wd = w.dims();
    let k = wd.sp;
    let wv = |o: usize, c: usize, a: usize, bb: usize, cc: usize| w.data()[(((o * wd.c + c) * k[2] + cc) * k[1] + bb) * k[0] + a];
    let mut y = Field::zeros(x.n, wd.n, out);
    for n in 0..x.n {
        for o in 0..wd.n {
            for (ox, oy, oz) in y.voxels().collect::<Vec<_>>() {
                let mut acc = b.map_or(0.0, |b| b.data()[o]);
                for c in 0..x.c {
                    for a in 0..k[0] {
                        for bb in 0..k[1] {
                            for cc in 0..k[2] {
                                let sx = (ox * stride[0] + a) as isize - lo[0] as isize;
                                let sy = (oy * stride[1] + bb) as isize - lo[1] as isize;
                                let sz = (oz * stride[2] + cc) as isize - lo[2] as isize;
                                if sx < 0 || sy < 0 || sz < 0 || sx >= x.sp[0] as isize || sy >= x.sp[1] as isize || sz >= x.sp[2] as isize {
                                    continue;
                                }
                                acc += wv(o, c, a, bb, cc) * x.get(n, c, sx as usize, sy as usize, sz as usize);
                            }
                        }
                    }
                }
                y.set(n, o, ox, oy, oz, acc);
            }
        }
    }
    y
}

/// Same-size convolution (stride 1, low padding `(k - 1) / 2`).
pub fn conv_same(x: &Field, w: &Tensor, b: Option<&Tensor>) -> Field {
    let k = w.dims().sp;
    conv(x, w, b, [1, 1, 1], [(k[0] - 1) / 2, (k[1] - 1) / 2, (k[2] - 1) / 2], x.sp)
}

pub fn group_norm(x: &Field, gamma: &Tensor, beta: &Tensor, groups: usize) -> Field {
    let per = x.c / groups;
    let mut y = x.clone();
    for n in 0..x.n {
        for g in 0..groups {
            let mut vals = Vec::new();
            for c in g * per..(g + 1) * per {
                for (a, b, cc) in x.voxels() {
                    vals.push(x.get(n, c, a, b, cc));
                }
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
            for c in g * per..(g + 1) * per {
                for (a, b, cc) in x.voxels() {
                    let v = (x.get(n, c, a, b, cc) - m) / (var + 1e-5).sqrt();
                    y.set(n, c, a, b, cc, v * gamma.data()[c] + beta.data()[c]);
                }
            }
        }
    }
    y
}

pub fn leaky(x: &Field, slope: f64) -> Field {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn add(a: &Field, b: &Field) -> Field {
    Field { v: a.v.iter().zip(&b.v).map(|(x, y)| x + y).collect(), ..a.clone() }
}

/// Per-channel spatial mean (`max = false`) or maximum, shape `[n, c, 1, 1, 1]`.
pub fn global(x: &Field, max: bool) -> Field {
    let mut y = Field::zeros(x.n, x.c, [1, 1, 1]);
    for n in 0..x.n {
        for c in 0..x.c {
            let vals: Vec<f64> = x.voxels().map(|(a, b, cc)| x.get(n, c, a, b, cc)).collect();
            let v = if max { vals.iter().cloned().fold(f64::MIN, f64::max) } else { vals.iter().sum::<f64>() / vals.len() as f64 };
            y.set(n, c, 0, 0, 0, v);
        }
    }
    y
}

/// Half-pixel linear interpolation weights along one axis.
fn taps(o: usize, input: usize, output: usize) -> [(usize, f64); 2] {
    let src = ((o as f64 + 0.5) * input as f64 / output as f64 - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(input - 1);
    let i1 = (i0 + 1).min(input - 1);
    let w = src - i0 as f64;
    [(i0, 1.0 - w), (i1, w)]
}

pub fn resize(x: &Field, out: [usize; 3]) -> Field {
    let mut y = Field::zeros(x.n, x.c, out);
    for n in 0..x.n {
        for c in 0..x.c {
            for (ox, oy, oz) in y.voxels().collect::<Vec<_>>() {
                let mut acc = 0.0;
                for (ix, wx) in taps(ox, x.sp[0], out[0]) {
                    for (iy, wy) in taps(oy, x.sp[1], out[1]) {
                        for (iz, wz) in taps(oz, x.sp[2], out[2]) {
                            acc += wx * wy * wz * x.get(n, c, ix, iy, iz);
                        }
                    }
                }
                y.set(n, c, ox, oy, oz, acc);
            }
        }
    }
    y
}

/// `x * s` where `s` has 1 channel or 1 voxel and broadcasts.
pub fn scale(x: &Field, s: &Field) -> Field {
    let mut y = x.clone();
    for n in 0..x.n {
        for c in 0..x.c {
            for (a, b, cc) in x.voxels() {
                let sc = if s.c == 1 { 0 } else { c };
                let (sa, sb, scc) = if s.sp == [1, 1, 1] { (0, 0, 0) } else { (a, b, cc) };
                y.set(n, c, a, b, cc, x.get(n, c, a, b, cc) * s.get(n, sc, sa, sb, scc));
            }
        }
    }
    y
}

pub fn param(p: &Params, name: &str) -> Tensor {
    p.get(name).unwrap_or_else(|| panic!("missing {name}")).clone()
}

pub fn close(a: &Tensor, b: &Field, tol: f64) {
    assert_eq!(a.dims().sp, b.sp);
    assert_eq!(a.dims().c, b.c);
    for (i, (x, y)) in a.data().iter().zip(&b.v).enumerate() {
        assert!((x - y).abs() <= tol, "element {i}: {x} vs {y}");
    }
}
