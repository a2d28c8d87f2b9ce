//! Trilinear resampling to an arbitrary grid with half-pixel centres
//! (`align_corners = false`), applied as three separable 1D passes.

use crate::tensor::{Dims, Tensor};

/// Source taps `(i0, i1, w1)` for each output position along one axis.
fn taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Geometry of one pass: `outer` independent lines of length `len` whose
/// elements are `inner` apart.
fn line_geometry(d: Dims, axis: usize) -> (usize, usize) {
    let inner: usize = d.sp[..axis].iter().product();
    let outer = d.n * d.c * d.sp[axis + 1..].iter().product::<usize>();
    (inner, outer)
}

fn pass_forward(src: &[f64], d: Dims, axis: usize, out_len: usize) -> (Vec<f64>, Dims) {
    let mut od = d;
    od.sp[axis] = out_len;
    let (inner, outer) = line_geometry(d, axis);
    let len = d.sp[axis];
    let t = taps(len, out_len);
    let mut dst = vec![0.0; od.numel()];
    for b in 0..outer {
        let s = &src[b * len * inner..(b + 1) * len * inner];
        let o = &mut dst[b * out_len * inner..(b + 1) * out_len * inner];
        for (k, &(i0, i1, w)) in t.iter().enumerate() {
            let (r0, r1) = (&s[i0 * inner..(i0 + 1) * inner], &s[i1 * inner..(i1 + 1) * inner]);
            for ((v, a), c) in o[k * inner..(k + 1) * inner].iter_mut().zip(r0).zip(r1) {
                *v = a * (1.0 - w) + c * w;
            }
        }
    }
    (dst, od)
}

fn pass_backward(gy: &[f64], d_in: Dims, axis: usize, out_len: usize) -> Vec<f64> {
    let (inner, outer) = line_geometry(d_in, axis);
    let len = d_in.sp[axis];
    let t = taps(len, out_len);
    let mut gx = vec![0.0; d_in.numel()];
    for b in 0..outer {
        let g = &gy[b * out_len * inner..(b + 1) * out_len * inner];
        let o = &mut gx[b * len * inner..(b + 1) * len * inner];
        for (k, &(i0, i1, w)) in t.iter().enumerate() {
            let gk = &g[k * inner..(k + 1) * inner];
            for j in 0..inner {
                o[i0 * inner + j] += gk[j] * (1.0 - w);
                o[i1 * inner + j] += gk[j] * w;
            }
        }
    }
    gx
}

pub fn resize_forward(x: &Tensor, target: [usize; 3]) -> Tensor {
    let mut d = x.dims();
    if d.sp == target {
        return x.clone();
    }
    let mut data = x.data().to_vec();
    for (axis, &len) in target.iter().enumerate() {
        if d.sp[axis] != len {
            let (next, nd) = pass_forward(&data, d, axis, len);
            data = next;
            d = nd;
        }
    }
    Tensor::new(d, data).expect("sizes agree")
}

pub fn resize_backward(input: Dims, gy: &Tensor) -> Tensor {
    if input.sp == gy.dims().sp {
        return gy.clone();
    }
    // Replay the forward dims, then undo the passes in reverse order.
    let mut stages = vec![input];
    let mut d = input;
    for axis in 0..3 {
        if d.sp[axis] != gy.dims().sp[axis] {
            d.sp[axis] = gy.dims().sp[axis];
            stages.push(d);
        }
    }
    let mut g = gy.data().to_vec();
    for w in stages.windows(2).rev() {
        let (d_in, d_out) = (w[0], w[1]);
        let axis = (0..3).find(|&a| d_in.sp[a] != d_out.sp[a]).expect("one axis changes");
        g = pass_backward(&g, d_in, axis, d_out.sp[axis]);
    }
    Tensor::new(input, g).expect("sizes agree")
}
