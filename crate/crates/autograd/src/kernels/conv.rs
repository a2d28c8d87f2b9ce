//! 3D convolution by chunked im2col + GEMM.
//!
//! Columns are built for a block of output rows (all `x` for a set of
//! `(y, z)`) so the scratch buffer stays bounded even on full-resolution
//! volumes.

use crate::error::{shape_err, Result};
use crate::gemm::{gemm, Layout};
use crate::tensor::{Dims, Tensor};

/// Upper bound on the im2col scratch buffer, in elements.
const COL_BUDGET: usize = 1 << 17;

/// Stride and (possibly asymmetric) zero padding of a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: [usize; 3],
    pub pad_lo: [usize; 3],
    pub pad_hi: [usize; 3],
}

impl ConvGeom {
    /// Shape-preserving padding at stride 1. Even kernels pad one voxel less
    /// on the low side than on the high side (`4 -> (1, 2)`, `2 -> (0, 1)`).
    pub fn same(kernel: [usize; 3]) -> Self {
        Self::strided(kernel, [1, 1, 1])
    }

    /// Same padding as [`ConvGeom::same`] with a stride; the output extent
    /// along each axis is `ceil(input / stride)`.
    pub fn strided(kernel: [usize; 3], stride: [usize; 3]) -> Self {
        let mut pad_lo = [0; 3];
        let mut pad_hi = [0; 3];
        for a in 0..3 {
            let total = kernel[a].saturating_sub(1);
            pad_lo[a] = total / 2;
            pad_hi[a] = total - pad_lo[a];
        }
        Self { stride, pad_lo, pad_hi }
    }

    /// No padding (e.g. a 2x2x1 kernel with matching stride).
    pub fn valid(stride: [usize; 3]) -> Self {
        Self { stride, pad_lo: [0; 3], pad_hi: [0; 3] }
    }

    pub fn output_size(&self, input: [usize; 3], kernel: [usize; 3]) -> Result<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let padded = input[a] + self.pad_lo[a] + self.pad_hi[a];
            if padded < kernel[a] || self.stride[a] == 0 {
                return Err(shape_err(
                    "conv3d",
                    format!("axis {a}: input {} padded to {padded} is smaller than kernel {}", input[a], kernel[a]),
                ));
            }
            out[a] = (padded - kernel[a]) / self.stride[a] + 1;
        }
        Ok(out)
    }

    fn is_pointwise(&self, kernel: [usize; 3]) -> bool {
        kernel == [1, 1, 1] && self.stride == [1, 1, 1] && self.pad_lo == [0; 3] && self.pad_hi == [0; 3]
    }
}

struct Plan {
    xd: Dims,
    wd: Dims,
    out: [usize; 3],
    k: usize,
    rows_per_chunk: usize,
}

fn plan(x: &Tensor, w: &Tensor, b: Option<&Tensor>, g: &ConvGeom) -> Result<Plan> {
    let xd = x.dims();
    let wd = w.dims();
    if wd.c != xd.c {
        return Err(shape_err("conv3d", format!("input has {} channels, kernel expects {}", xd.c, wd.c)));
    }
    if let Some(b) = b {
        if b.dims() != Dims::vector(wd.n) {
            return Err(shape_err("conv3d", format!("bias {} for {} output channels", b.dims(), wd.n)));
        }
    }
    let out = g.output_size(xd.sp, wd.sp)?;
    let k = wd.c * wd.spatial();
    let rows_per_chunk = (COL_BUDGET / (k * out[0]).max(1)).max(1);
    Ok(Plan { xd, wd, out, k, rows_per_chunk })
}

/// Output columns `lo..hi` whose source `xo * stride + dx - pad` lies inside `0..ix`.
fn valid_x(ox: usize, ix: usize, stride: usize, dx: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(dx).div_ceil(stride).min(ox);
    // largest xo with xo * stride + dx - pad <= ix - 1
    let hi = if ix + pad < dx + 1 { 0 } else { ((ix + pad - dx - 1) / stride + 1).min(ox) };
    (lo, hi.max(lo))
}

/// Fills `cols` (row-major `k x (rows * ox)`) for output rows `r0..r1` of item `n`.
fn im2col(x: &Tensor, p: &Plan, g: &ConvGeom, n: usize, r0: usize, r1: usize, cols: &mut [f64]) {
    let [ix, iy, iz] = p.xd.sp;
    let [kx, ky, kz] = p.wd.sp;
    let [ox, oy, _] = p.out;
    let ncols = (r1 - r0) * ox;
    let mut row = 0;
    for ci in 0..p.xd.c {
        let chan = x.channel(n, ci);
        for dz in 0..kz {
            for dy in 0..ky {
                for dx in 0..kx {
                    let dst = &mut cols[row * ncols..(row + 1) * ncols];
                    for (rr, seg) in (r0..r1).zip(dst.chunks_exact_mut(ox)) {
                        let (y, z) = (rr % oy, rr / oy);
                        let sz = (z * g.stride[2] + dz) as isize - g.pad_lo[2] as isize;
                        let sy = (y * g.stride[1] + dy) as isize - g.pad_lo[1] as isize;
                        if sz < 0 || sz >= iz as isize || sy < 0 || sy >= iy as isize {
                            seg.fill(0.0);
                            continue;
                        }
                        let line = &chan[(sz as usize * iy + sy as usize) * ix..][..ix];
                        let (lo, hi) = valid_x(ox, ix, g.stride[0], dx, g.pad_lo[0]);
                        seg[..lo].fill(0.0);
                        seg[hi..].fill(0.0);
                        if hi == lo {
                            continue;
                        }
                        if g.stride[0] == 1 {
                            let s0 = lo + dx - g.pad_lo[0];
                            seg[lo..hi].copy_from_slice(&line[s0..s0 + hi - lo]);
                        } else {
                            for (xo, v) in seg[lo..hi].iter_mut().enumerate() {
                                *v = line[(lo + xo) * g.stride[0] + dx - g.pad_lo[0]];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Scatter-adds `cols` back into the input gradient (transpose of [`im2col`]).
fn col2im(gx: &mut Tensor, p: &Plan, g: &ConvGeom, n: usize, r0: usize, r1: usize, cols: &[f64]) {
    let [ix, iy, iz] = p.xd.sp;
    let [kx, ky, kz] = p.wd.sp;
    let [ox, oy, _] = p.out;
    let ncols = (r1 - r0) * ox;
    let s = p.xd.spatial();
    let c = p.xd.c;
    let data = gx.data_mut();
    let mut row = 0;
    for ci in 0..c {
        let chan = &mut data[(n * c + ci) * s..(n * c + ci + 1) * s];
        for dz in 0..kz {
            for dy in 0..ky {
                for dx in 0..kx {
                    let src = &cols[row * ncols..(row + 1) * ncols];
                    for (rr, seg) in (r0..r1).zip(src.chunks_exact(ox)) {
                        let (y, z) = (rr % oy, rr / oy);
                        let sz = (z * g.stride[2] + dz) as isize - g.pad_lo[2] as isize;
                        let sy = (y * g.stride[1] + dy) as isize - g.pad_lo[1] as isize;
                        if sz < 0 || sz >= iz as isize || sy < 0 || sy >= iy as isize {
                            continue;
                        }
                        let line = &mut chan[(sz as usize * iy + sy as usize) * ix..][..ix];
                        let (lo, hi) = valid_x(ox, ix, g.stride[0], dx, g.pad_lo[0]);
                        for (xo, v) in seg[lo..hi].iter().enumerate() {
                            line[(lo + xo) * g.stride[0] + dx - g.pad_lo[0]] += v;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

pub fn conv3d_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>, g: &ConvGeom) -> Result<Tensor> {
    let p = plan(x, w, b, g)?;
    let co = p.wd.n;
    let od = Dims::new(p.xd.n, co, p.out);
    let os = od.spatial();
    let mut y = Tensor::zeros(od);
    let total_rows = p.out[1] * p.out[2];
    let pointwise = g.is_pointwise(p.wd.sp);
    let mut cols = Vec::new();
    for n in 0..p.xd.n {
        let ybase = n * co * os;
        if pointwise {
            let xs = &x.data()[n * p.xd.c * os..(n + 1) * p.xd.c * os];
            gemm(co, p.k, os, w.data(), Layout::row_major(p.k), xs, Layout::row_major(os), 0.0, &mut y.data_mut()[ybase..], Layout::row_major(os));
        } else {
            let mut r0 = 0;
            while r0 < total_rows {
                let r1 = (r0 + p.rows_per_chunk).min(total_rows);
                let ncols = (r1 - r0) * p.out[0];
                cols.resize(p.k * ncols, 0.0);
                im2col(x, &p, g, n, r0, r1, &mut cols);
                let out = &mut y.data_mut()[ybase + r0 * p.out[0]..];
                gemm(co, p.k, ncols, w.data(), Layout::row_major(p.k), &cols, Layout::row_major(ncols), 0.0, out, Layout { rs: os, cs: 1 });
                r0 = r1;
            }
        }
        if let Some(b) = b {
            let yd = y.data_mut();
            for (o, &bv) in b.data().iter().enumerate() {
                for v in &mut yd[ybase + o * os..ybase + (o + 1) * os] {
                    *v += bv;
                }
            }
        }
    }
    Ok(y)
}

/// Gradients `(input, kernel, bias)` of a convolution.
pub fn conv3d_backward(x: &Tensor, w: &Tensor, has_bias: bool, g: &ConvGeom, gy: &Tensor) -> Result<(Tensor, Tensor, Option<Tensor>)> {
    let p = plan(x, w, None, g)?;
    let co = p.wd.n;
    let os = p.out[0] * p.out[1] * p.out[2];
    let mut gx = Tensor::zeros(p.xd);
    let mut gw = Tensor::zeros(p.wd);
    let mut gb = has_bias.then(|| Tensor::zeros(Dims::vector(co)));
    let total_rows = p.out[1] * p.out[2];
    let pointwise = g.is_pointwise(p.wd.sp);
    let mut cols = Vec::new();
    let mut gcols = Vec::new();
    for n in 0..p.xd.n {
        let gys = &gy.data()[n * co * os..(n + 1) * co * os];
        if let Some(gb) = gb.as_mut() {
            for (o, v) in gb.data_mut().iter_mut().enumerate() {
                *v += gys[o * os..(o + 1) * os].iter().sum::<f64>();
            }
        }
        if pointwise {
            let xs = &x.data()[n * p.xd.c * os..(n + 1) * p.xd.c * os];
            // gw += gy * x^T
            gemm(co, os, p.k, gys, Layout::row_major(os), xs, Layout::col_major(os), 1.0, gw.data_mut(), Layout::row_major(p.k));
            // gx = w^T * gy
            let gxs = &mut gx.data_mut()[n * p.xd.c * os..];
            gemm(p.k, co, os, w.data(), Layout::col_major(p.k), gys, Layout::row_major(os), 0.0, gxs, Layout::row_major(os));
            continue;
        }
        let mut r0 = 0;
        while r0 < total_rows {
            let r1 = (r0 + p.rows_per_chunk).min(total_rows);
            let ncols = (r1 - r0) * p.out[0];
            cols.resize(p.k * ncols, 0.0);
            gcols.resize(p.k * ncols, 0.0);
            im2col(x, &p, g, n, r0, r1, &mut cols);
            let gy_chunk = &gys[r0 * p.out[0]..];
            let lgy = Layout { rs: os, cs: 1 };
            gemm(co, ncols, p.k, gy_chunk, lgy, &cols, Layout::col_major(ncols), 1.0, gw.data_mut(), Layout::row_major(p.k));
            gemm(p.k, co, ncols, w.data(), Layout::col_major(p.k), gy_chunk, lgy, 0.0, &mut gcols, Layout::row_major(ncols));
            col2im(&mut gx, &p, g, n, r0, r1, &gcols);
            r0 = r1;
        }
    }
    Ok((gx, gw, gb))
}
