//! Finite-difference verification of network gradients.
//!
//! Rectifiers and max pooling make the loss piecewise smooth. A central
//! difference whose stencil crosses a switching point (a rectifier input
//! changing sign, a pooling winner changing) measures a blend of two slopes,
//! so every evaluation also fingerprints the activation pattern. Elements
//! whose `±h` stencil changes the pattern are re-checked with a step small
//! enough to stay on one piece.

use std::borrow::Cow;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use strokeseg_autograd::kernels::pool::max_pool_forward;
use strokeseg_autograd::{Backend, ConvGeom, Eval, PoolKind, Tape, Tensor};

use crate::config::{LossConfig, NetworkConfig};
use crate::error::Result;
use crate::losses::supervised_loss;
use crate::network::{forward_graph, NetworkWeights};

/// Evaluates like [`Eval`] while hashing every branch decision.
struct Fingerprint<'a> {
    inner: Eval<'a>,
    hash: DefaultHasher,
}

type R<'a> = strokeseg_autograd::Result<Cow<'a, Tensor>>;

fn argmax_hash(h: &mut DefaultHasher, vals: impl Iterator<Item = f64>) {
    let mut best = f64::NEG_INFINITY;
    let mut at = 0usize;
    for (i, v) in vals.enumerate() {
        if v > best {
            best = v;
            at = i;
        }
    }
    at.hash(h);
}

impl<'a> Backend for Fingerprint<'a> {
    type T = Cow<'a, Tensor>;

    fn param(&mut self, name: &str) -> R<'a> {
        self.inner.param(name)
    }
    fn input(&mut self, t: Tensor) -> Self::T {
        self.inner.input(t)
    }
    fn value<'v>(&'v self, v: &'v Self::T) -> &'v Tensor {
        v
    }
    fn conv3d(&mut self, x: &Self::T, w: &Self::T, b: Option<&Self::T>, g: ConvGeom) -> R<'a> {
        self.inner.conv3d(x, w, b, g)
    }
    fn group_norm(&mut self, x: &Self::T, g: &Self::T, b: &Self::T, groups: usize) -> R<'a> {
        self.inner.group_norm(x, g, b, groups)
    }
    fn leaky_relu(&mut self, x: &Self::T, slope: f64) -> Self::T {
        for chunk in x.data().chunks(64) {
            let bits = chunk.iter().enumerate().fold(0u64, |acc, (i, v)| acc | (u64::from(*v > 0.0) << i));
            bits.hash(&mut self.hash);
        }
        self.inner.leaky_relu(x, slope)
    }
    fn sigmoid(&mut self, x: &Self::T) -> Self::T {
        self.inner.sigmoid(x)
    }
    fn max_pool(&mut self, x: &Self::T, window: [usize; 3]) -> R<'a> {
        let (y, arg) = max_pool_forward(x, window)?;
        arg.hash(&mut self.hash);
        Ok(Cow::Owned(y))
    }
    fn resize(&mut self, x: &Self::T, target: [usize; 3]) -> Self::T {
        self.inner.resize(x, target)
    }
    fn concat(&mut self, parts: &[&Self::T]) -> R<'a> {
        self.inner.concat(parts)
    }
    fn add(&mut self, a: &Self::T, b: &Self::T) -> R<'a> {
        self.inner.add(a, b)
    }
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> R<'a> {
        self.inner.mul(a, b)
    }
    fn global_pool(&mut self, x: &Self::T, kind: PoolKind) -> Self::T {
        if kind == PoolKind::Max {
            let d = x.dims();
            for nc in 0..d.n * d.c {
                argmax_hash(&mut self.hash, x.data()[nc * d.spatial()..(nc + 1) * d.spatial()].iter().copied());
            }
        }
        self.inner.global_pool(x, kind)
    }
    fn channel_pool(&mut self, x: &Self::T, kind: PoolKind) -> Self::T {
        if kind == PoolKind::Max {
            let d = x.dims();
            let s = d.spatial();
            for n in 0..d.n {
                for v in 0..s {
                    argmax_hash(&mut self.hash, (0..d.c).map(|c| x.data()[(n * d.c + c) * s + v]));
                }
            }
        }
        self.inner.channel_pool(x, kind)
    }
}

/// Loss of all heads plus the activation-pattern fingerprint.
fn evaluate(w: &NetworkWeights, x: &Tensor, y: &Tensor, loss: &LossConfig) -> Result<(f64, u64)> {
    let mut b = Fingerprint { inner: Eval::new(w), hash: DefaultHasher::new() };
    let f = forward_graph(&mut b, &w.config, x.clone(), None)?;
    let heads: Vec<&Tensor> = f.heads.iter().map(|h| h.as_ref()).collect();
    let (value, _) = supervised_loss(loss, &heads, y)?;
    Ok((value, b.hash.finish()))
}

/// Analytic gradients of the supervised loss for every parameter.
pub fn analytic_gradients(w: &NetworkWeights, x: &Tensor, y: &Tensor, loss: &LossConfig) -> Result<strokeseg_autograd::Gradients> {
    let mut tape = Tape::new(w);
    let f = forward_graph(&mut tape, &w.config, x.clone(), None)?;
    let heads: Vec<&Tensor> = f.heads.iter().map(|h| tape.value(h)).collect();
    let (_, seeds) = supervised_loss(loss, &heads, y)?;
    Ok(tape.backward(f.heads.iter().copied().zip(seeds).collect())?)
}

#[derive(Debug, Clone, Default)]
pub struct GradReport {
    /// Elements compared at the requested step.
    pub checked: usize,
    /// Elements whose stencil crossed a switching point and were compared
    /// at a smaller step instead.
    pub refined: usize,
    pub worst_relative_error: f64,
    /// Descriptions of elements exceeding the tolerance.
    pub failures: Vec<String>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares every parameter's analytic gradient with central differences of
/// step `h`. Where the `±h` stencil changes the activation pattern the step
/// shrinks tenfold, down to `h_min`, until it no longer does.
pub fn check_network_gradients(w: &NetworkWeights, x: &Tensor, y: &Tensor, loss: &LossConfig, h: f64, h_min: f64, tol: f64) -> Result<GradReport> {
    let grads = analytic_gradients(w, x, y, loss)?;
    let (_, nominal) = evaluate(w, x, y, loss)?;
    let mut report = GradReport::default();
    let mut probe = w.clone();
    for (name, t) in &w.params {
        for i in 0..t.numel() {
            let base = t.data()[i];
            let mut central = |step: f64| -> Result<(f64, bool)> {
                set(&mut probe, name, i, base + step);
                let (lp, fp) = evaluate(&probe, x, y, loss)?;
                set(&mut probe, name, i, base - step);
                let (lm, fm) = evaluate(&probe, x, y, loss)?;
                set(&mut probe, name, i, base);
                Ok(((lp - lm) / (2.0 * step), fp == nominal && fm == nominal))
            };
            let (mut numeric, mut smooth) = central(h)?;
            if smooth {
                report.checked += 1;
            } else {
                report.refined += 1;
                let mut step = h;
                while !smooth && step / 10.0 >= h_min {
                    step /= 10.0;
                    (numeric, smooth) = central(step)?;
                }
                if !smooth {
                    report.failures.push(format!("{name}[{i}]: switching point within {h_min:e}"));
                    continue;
                }
            }
            let analytic = grads[name].data()[i];
            let rel = relative_error(analytic, numeric, 1e-6);
            report.worst_relative_error = report.worst_relative_error.max(rel);
            if rel > tol {
                report.failures.push(format!("{name}[{i}]: analytic {analytic:e}, numeric {numeric:e}"));
            }
        }
    }
    Ok(report)
}

fn set(w: &mut NetworkWeights, name: &str, i: usize, v: f64) {
    w.params.get_mut(name).expect("same keys").data_mut()[i] = v;
}

/// The downsized configuration used for end-to-end gradient checks: width 2
/// everywhere.
pub fn tiny_config(base: &NetworkConfig) -> NetworkConfig {
    NetworkConfig { encoder_filters: [2; 5], bottleneck_filters: 2, gn_groups: 2, se_reduction: 2, ag_reduction: 2, ..base.clone() }
}
