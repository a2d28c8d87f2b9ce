//! Pointwise activations, broadcasting products and channel concatenation.

use crate::error::{shape_err, Result};
use crate::tensor::{Dims, Tensor};

pub fn leaky_relu_forward(x: &Tensor, slope: f64) -> Tensor {
    let data = x.data().iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect();
    Tensor::new(x.dims(), data).expect("same dims")
}

pub fn leaky_relu_backward(x: &Tensor, slope: f64, gy: &Tensor) -> Tensor {
    let data = x.data().iter().zip(gy.data()).map(|(&v, &g)| if v > 0.0 { g } else { slope * g }).collect();
    Tensor::new(x.dims(), data).expect("same dims")
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    Tensor::new(x.dims(), x.data().iter().map(|&v| sigmoid(v)).collect()).expect("same dims")
}

/// Uses the saved output `y = sigmoid(x)`.
pub fn sigmoid_backward(y: &Tensor, gy: &Tensor) -> Tensor {
    let data = y.data().iter().zip(gy.data()).map(|(&s, &g)| g * s * (1.0 - s)).collect();
    Tensor::new(y.dims(), data).expect("same dims")
}

pub fn add_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(shape_err("add", format!("{} vs {}", a.dims(), b.dims())));
    }
    let mut y = a.clone();
    y.add_assign(b);
    Ok(y)
}

/// Whether `b` can be broadcast against `a` (each extent equal or 1).
pub fn broadcastable(a: Dims, b: Dims) -> bool {
    a.as_array().iter().zip(b.as_array()).all(|(&x, y)| y == x || y == 1)
}

/// Maps each flat index of `a` to the flat index of the broadcast `b`.
fn broadcast_index(a: Dims, b: Dims) -> impl Fn(usize) -> usize {
    let ae = a.as_array();
    let be = b.as_array();
    // memory order: n, c, z, y, x
    let order = [0usize, 1, 4, 3, 2];
    let mut a_str = [0usize; 5];
    let mut b_str = [0usize; 5];
    let (mut sa, mut sb) = (1, 1);
    for &ax in order.iter().rev() {
        a_str[ax] = sa;
        b_str[ax] = if be[ax] == 1 { 0 } else { sb };
        sa *= ae[ax];
        sb *= be[ax];
    }
    move |i| {
        let mut j = 0;
        for ax in 0..5 {
            j += (i / a_str[ax]) % ae[ax] * b_str[ax];
        }
        j
    }
}

/// `a * b` where `b` broadcasts over its singleton axes.
pub fn mul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !broadcastable(a.dims(), b.dims()) {
        return Err(shape_err("mul", format!("{} does not broadcast to {}", b.dims(), a.dims())));
    }
    if a.dims() == b.dims() {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        return Tensor::new(a.dims(), data);
    }
    let map = broadcast_index(a.dims(), b.dims());
    let data = a.data().iter().enumerate().map(|(i, x)| x * b.data()[map(i)]).collect();
    Tensor::new(a.dims(), data)
}

pub fn mul_backward(a: &Tensor, b: &Tensor, gy: &Tensor) -> (Tensor, Tensor) {
    if a.dims() == b.dims() {
        let ga = gy.data().iter().zip(b.data()).map(|(g, y)| g * y).collect();
        let gb = gy.data().iter().zip(a.data()).map(|(g, x)| g * x).collect();
        return (Tensor::new(a.dims(), ga).expect("same dims"), Tensor::new(b.dims(), gb).expect("same dims"));
    }
    let map = broadcast_index(a.dims(), b.dims());
    let mut ga = Tensor::zeros(a.dims());
    let mut gb = Tensor::zeros(b.dims());
    for (i, (&g, &x)) in gy.data().iter().zip(a.data()).enumerate() {
        let j = map(i);
        ga.data_mut()[i] = g * b.data()[j];
        gb.data_mut()[j] += g * x;
    }
    (ga, gb)
}

/// Concatenates along the channel axis.
pub fn concat_forward(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| shape_err("concat", "nothing to concatenate"))?.dims();
    if let Some(bad) = parts.iter().find(|p| p.dims().n != first.n || p.dims().sp != first.sp) {
        return Err(shape_err("concat", format!("{} vs {}", bad.dims(), first)));
    }
    let c: usize = parts.iter().map(|p| p.dims().c).sum();
    let s = first.spatial();
    let mut data = Vec::with_capacity(first.n * c * s);
    for n in 0..first.n {
        for p in parts {
            let per = p.dims().c * s;
            data.extend_from_slice(&p.data()[n * per..(n + 1) * per]);
        }
    }
    Tensor::new(Dims::new(first.n, c, first.sp), data)
}

pub fn concat_backward(channels: &[usize], gy: &Tensor) -> Vec<Tensor> {
    let d = gy.dims();
    let s = d.spatial();
    let mut out: Vec<Vec<f64>> = channels.iter().map(|c| Vec::with_capacity(d.n * c * s)).collect();
    for n in 0..d.n {
        let mut off = n * d.c * s;
        for (buf, &c) in out.iter_mut().zip(channels) {
            buf.extend_from_slice(&gy.data()[off..off + c * s]);
            off += c * s;
        }
    }
    out.into_iter()
        .zip(channels)
        .map(|(data, &c)| Tensor::new(Dims::new(d.n, c, d.sp), data).expect("sizes agree"))
        .collect()
}
