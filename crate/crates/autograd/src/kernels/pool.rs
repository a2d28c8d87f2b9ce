//! Max pooling (ceil mode) and global / cross-channel reductions.

use crate::backend::PoolKind;
use crate::error::{shape_err, Result};
use crate::tensor::{Dims, Tensor};

pub fn pooled_size(input: [usize; 3], window: [usize; 3]) -> [usize; 3] {
    [0, 1, 2].map(|a| input[a].div_ceil(window[a]))
}

/// Non-overlapping max pooling; border windows are truncated rather than
/// dropped. Returns the output and, per output element, the flat input index
/// of the (first) maximum.
pub fn max_pool_forward(x: &Tensor, window: [usize; 3]) -> Result<(Tensor, Vec<usize>)> {
    if window.contains(&0) {
        return Err(shape_err("max_pool", "zero window"));
    }
    let d = x.dims();
    let [ix, iy, iz] = d.sp;
    let out = pooled_size(d.sp, window);
    let od = Dims::new(d.n, d.c, out);
    let mut y = Tensor::zeros(od);
    let mut arg = vec![0usize; od.numel()];
    let s = d.spatial();
    let mut o = 0;
    for nc in 0..d.n * d.c {
        let base = nc * s;
        for oz in 0..out[2] {
            for oy in 0..out[1] {
                for ox in 0..out[0] {
                    let mut best = f64::NEG_INFINITY;
                    let mut at = usize::MAX;
                    for z in oz * window[2]..((oz + 1) * window[2]).min(iz) {
                        for yy in oy * window[1]..((oy + 1) * window[1]).min(iy) {
                            for xx in ox * window[0]..((ox + 1) * window[0]).min(ix) {
                                let i = base + (z * iy + yy) * ix + xx;
                                let v = x.data()[i];
                                if v > best || at == usize::MAX {
                                    best = v;
                                    at = i;
                                }
                            }
                        }
                    }
                    y.data_mut()[o] = best;
                    arg[o] = at;
                    o += 1;
                }
            }
        }
    }
    Ok((y, arg))
}

pub fn max_pool_backward(input: Dims, argmax: &[usize], gy: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input);
    for (&i, g) in argmax.iter().zip(gy.data()) {
        gx.data_mut()[i] += g;
    }
    gx
}

/// Reduces every channel over space to `[n, c, 1, 1, 1]`.
pub fn global_pool_forward(x: &Tensor, kind: PoolKind) -> Tensor {
    let d = x.dims();
    let data = (0..d.n * d.c)
        .map(|nc| {
            let ch = &x.data()[nc * d.spatial()..(nc + 1) * d.spatial()];
            match kind {
                PoolKind::Avg => ch.iter().sum::<f64>() / ch.len() as f64,
                PoolKind::Max => ch.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Tensor::new(Dims::new(d.n, d.c, [1, 1, 1]), data).expect("sizes agree")
}

pub fn global_pool_backward(x: &Tensor, kind: PoolKind, gy: &Tensor) -> Tensor {
    let d = x.dims();
    let s = d.spatial();
    let mut gx = Tensor::zeros(d);
    for nc in 0..d.n * d.c {
        let g = gy.data()[nc];
        let ch = &x.data()[nc * s..(nc + 1) * s];
        let out = &mut gx.data_mut()[nc * s..(nc + 1) * s];
        match kind {
            PoolKind::Avg => out.fill(g / s as f64),
            PoolKind::Max => {
                let at = first_argmax(ch.iter().copied());
                out[at] = g;
            }
        }
    }
    gx
}

/// Reduces across channels at every voxel to `[n, 1, x, y, z]`.
pub fn channel_pool_forward(x: &Tensor, kind: PoolKind) -> Tensor {
    let d = x.dims();
    let s = d.spatial();
    let mut y = Tensor::zeros(Dims::new(d.n, 1, d.sp));
    for n in 0..d.n {
        for v in 0..s {
            let vals = (0..d.c).map(|c| x.data()[(n * d.c + c) * s + v]);
            y.data_mut()[n * s + v] = match kind {
                PoolKind::Avg => vals.sum::<f64>() / d.c as f64,
                PoolKind::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            };
        }
    }
    y
}

pub fn channel_pool_backward(x: &Tensor, kind: PoolKind, gy: &Tensor) -> Tensor {
    let d = x.dims();
    let s = d.spatial();
    let mut gx = Tensor::zeros(d);
    for n in 0..d.n {
        for v in 0..s {
            let g = gy.data()[n * s + v];
            match kind {
                PoolKind::Avg => {
                    for c in 0..d.c {
                        gx.data_mut()[(n * d.c + c) * s + v] = g / d.c as f64;
                    }
                }
                PoolKind::Max => {
                    let c = first_argmax((0..d.c).map(|c| x.data()[(n * d.c + c) * s + v]));
                    gx.data_mut()[(n * d.c + c) * s + v] = g;
                }
            }
        }
    }
    gx
}

fn first_argmax(vals: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut at = 0;
    for (i, v) in vals.enumerate() {
        if v > best {
            best = v;
            at = i;
        }
    }
    at
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_mode_keeps_the_border() {
        let d = Dims::new(1, 1, [3, 3, 1]);
        let x = Tensor::new(d, vec![1., 5., 2., 3., 4., 9., 7., 0., 8.]).unwrap();
        let (y, arg) = max_pool_forward(&x, [2, 2, 1]).unwrap();
        assert_eq!(y.dims().sp, [2, 2, 1]);
        assert_eq!(y.data(), &[5., 9., 7., 8.]);
        assert_eq!(arg, vec![1, 5, 6, 8]);
        let gx = max_pool_backward(d, &arg, &Tensor::filled(y.dims(), 1.0));
        assert_eq!(gx.data(), &[0., 1., 0., 0., 0., 1., 1., 0., 1.]);
    }

    #[test]
    fn pooled_size_rounds_up() {
        assert_eq!(pooled_size([3, 7, 8], [2, 2, 1]), [2, 4, 8]);
        assert_eq!(pooled_size([48, 56, 8], [2, 2, 1]), [24, 28, 8]);
    }

    #[test]
    fn global_and_channel_reductions() {
        let d = Dims::new(1, 2, [2, 1, 1]);
        let x = Tensor::new(d, vec![1., 3., -2., 0.5]).unwrap();
        assert_eq!(global_pool_forward(&x, PoolKind::Avg).data(), &[2.0, -0.75]);
        assert_eq!(global_pool_forward(&x, PoolKind::Max).data(), &[3.0, 0.5]);
        assert_eq!(channel_pool_forward(&x, PoolKind::Avg).data(), &[-0.5, 1.75]);
        assert_eq!(channel_pool_forward(&x, PoolKind::Max).data(), &[1.0, 3.0]);
    }
}
