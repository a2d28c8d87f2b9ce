//! Group normalisation with per-channel affine parameters.

use crate::error::{shape_err, Result};
use crate::tensor::{Dims, Tensor};

pub const GN_EPS: f64 = 1e-5;

fn check(x: &Tensor, gamma: &Tensor, beta: &Tensor, groups: usize) -> Result<usize> {
    let d = x.dims();
    if groups == 0 || !d.c.is_multiple_of(groups) {
        return Err(shape_err("group_norm", format!("{} channels not divisible into {groups} groups", d.c)));
    }
    if gamma.dims() != Dims::vector(d.c) || beta.dims() != Dims::vector(d.c) {
        return Err(shape_err("group_norm", format!("affine parameters must be 1x{}x1x1x1", d.c)));
    }
    Ok(d.c / groups)
}

/// Mean and inverse standard deviation (biased variance) of one group.
fn stats(block: &[f64]) -> (f64, f64) {
    let m = block.len() as f64;
    let mean = block.iter().sum::<f64>() / m;
    let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, 1.0 / (var + GN_EPS).sqrt())
}

pub fn group_norm_forward(x: &Tensor, gamma: &Tensor, beta: &Tensor, groups: usize) -> Result<Tensor> {
    let per = check(x, gamma, beta, groups)?;
    let d = x.dims();
    let s = d.spatial();
    let mut y = Tensor::zeros(d);
    for n in 0..d.n {
        for g in 0..groups {
            let off = (n * d.c + g * per) * s;
            let block = &x.data()[off..off + per * s];
            let (mean, inv) = stats(block);
            let out = &mut y.data_mut()[off..off + per * s];
            for j in 0..per {
                let c = g * per + j;
                let (ga, be) = (gamma.data()[c], beta.data()[c]);
                for (o, v) in out[j * s..(j + 1) * s].iter_mut().zip(&block[j * s..(j + 1) * s]) {
                    *o = (v - mean) * inv * ga + be;
                }
            }
        }
    }
    Ok(y)
}

/// Gradients `(input, gamma, beta)`.
pub fn group_norm_backward(x: &Tensor, gamma: &Tensor, groups: usize, gy: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let d = x.dims();
    let per = check(x, gamma, gamma, groups)?;
    let s = d.spatial();
    let mut gx = Tensor::zeros(d);
    let mut gg = Tensor::zeros(Dims::vector(d.c));
    let mut gb = Tensor::zeros(Dims::vector(d.c));
    for n in 0..d.n {
        for g in 0..groups {
            let off = (n * d.c + g * per) * s;
            let block = &x.data()[off..off + per * s];
            let gyb = &gy.data()[off..off + per * s];
            let (mean, inv) = stats(block);
            let m = (per * s) as f64;
            let mut sum_gxh = 0.0;
            let mut sum_gxh_xh = 0.0;
            for j in 0..per {
                let c = g * per + j;
                let ga = gamma.data()[c];
                let (mut sg, mut sgx) = (0.0, 0.0);
                for (v, gv) in block[j * s..(j + 1) * s].iter().zip(&gyb[j * s..(j + 1) * s]) {
                    let xh = (v - mean) * inv;
                    sg += gv;
                    sgx += gv * xh;
                }
                gb.data_mut()[c] += sg;
                gg.data_mut()[c] += sgx;
                sum_gxh += sg * ga;
                sum_gxh_xh += sgx * ga;
            }
            let (mg, mgx) = (sum_gxh / m, sum_gxh_xh / m);
            let out = &mut gx.data_mut()[off..off + per * s];
            for j in 0..per {
                let ga = gamma.data()[g * per + j];
                for ((o, v), gv) in out[j * s..(j + 1) * s].iter_mut().zip(&block[j * s..(j + 1) * s]).zip(&gyb[j * s..(j + 1) * s]) {
                    let xh = (v - mean) * inv;
                    *o = inv * (gv * ga - mg - xh * mgx);
                }
            }
        }
    }
    Ok((gx, gg, gb))
}
