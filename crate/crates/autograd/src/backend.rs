use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{AutogradError, Result};
use crate::kernels::{conv, elementwise as ew, norm, pool, resize};
use crate::tensor::Tensor;
use crate::ConvGeom;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Avg,
    Max,
}

/// Named parameter storage a forward pass reads from.
pub trait ParamSource {
    fn param(&self, name: &str) -> Option<&Tensor>;
}

impl ParamSource for BTreeMap<String, Tensor> {
    fn param(&self, name: &str) -> Option<&Tensor> {
        self.get(name)
    }
}

/// Operations a network forward pass is written against.
pub trait Backend {
    type T: Clone;

    fn param(&mut self, name: &str) -> Result<Self::T>;
    /// A constant (no gradient flows into it).
    fn input(&mut self, t: Tensor) -> Self::T;
    fn value<'v>(&'v self, v: &'v Self::T) -> &'v Tensor;

    fn conv3d(&mut self, x: &Self::T, w: &Self::T, b: Option<&Self::T>, geom: ConvGeom) -> Result<Self::T>;
    fn group_norm(&mut self, x: &Self::T, gamma: &Self::T, beta: &Self::T, groups: usize) -> Result<Self::T>;
    fn leaky_relu(&mut self, x: &Self::T, slope: f64) -> Self::T;
    fn sigmoid(&mut self, x: &Self::T) -> Self::T;
    fn max_pool(&mut self, x: &Self::T, window: [usize; 3]) -> Result<Self::T>;
    fn resize(&mut self, x: &Self::T, target: [usize; 3]) -> Self::T;
    fn concat(&mut self, parts: &[&Self::T]) -> Result<Self::T>;
    fn add(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T>;
    /// Product where `b` broadcasts over its singleton axes.
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T>;
    fn global_pool(&mut self, x: &Self::T, kind: PoolKind) -> Self::T;
    fn channel_pool(&mut self, x: &Self::T, kind: PoolKind) -> Self::T;

    fn relu(&mut self, x: &Self::T) -> Self::T {
        self.leaky_relu(x, 0.0)
    }

    /// Fails with the layer name if the activation holds NaN or infinity.
    fn ensure_finite(&self, x: &Self::T, layer: &str) -> Result<()> {
        if self.value(x).all_finite() {
            Ok(())
        } else {
            Err(AutogradError::NonFinite(layer.to_string()))
        }
    }
}

/// Inference backend: evaluates eagerly and keeps nothing for a backward pass.
pub struct Eval<'a> {
    params: &'a dyn ParamSource,
}

impl<'a> Eval<'a> {
    pub fn new(params: &'a dyn ParamSource) -> Self {
        Self { params }
    }
}

impl<'a> Backend for Eval<'a> {
    type T = Cow<'a, Tensor>;

    fn param(&mut self, name: &str) -> Result<Self::T> {
        self.params.param(name).map(Cow::Borrowed).ok_or_else(|| AutogradError::UnknownParam(name.to_string()))
    }

    fn input(&mut self, t: Tensor) -> Self::T {
        Cow::Owned(t)
    }

    fn value<'v>(&'v self, v: &'v Self::T) -> &'v Tensor {
        v
    }

    fn conv3d(&mut self, x: &Self::T, w: &Self::T, b: Option<&Self::T>, geom: ConvGeom) -> Result<Self::T> {
        conv::conv3d_forward(x, w, b.map(|b| b.as_ref()), &geom).map(Cow::Owned)
    }

    fn group_norm(&mut self, x: &Self::T, gamma: &Self::T, beta: &Self::T, groups: usize) -> Result<Self::T> {
        norm::group_norm_forward(x, gamma, beta, groups).map(Cow::Owned)
    }

    fn leaky_relu(&mut self, x: &Self::T, slope: f64) -> Self::T {
        Cow::Owned(ew::leaky_relu_forward(x, slope))
    }

    fn sigmoid(&mut self, x: &Self::T) -> Self::T {
        Cow::Owned(ew::sigmoid_forward(x))
    }

    fn max_pool(&mut self, x: &Self::T, window: [usize; 3]) -> Result<Self::T> {
        pool::max_pool_forward(x, window).map(|(y, _)| Cow::Owned(y))
    }

    fn resize(&mut self, x: &Self::T, target: [usize; 3]) -> Self::T {
        Cow::Owned(resize::resize_forward(x, target))
    }

    fn concat(&mut self, parts: &[&Self::T]) -> Result<Self::T> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| p.as_ref()).collect();
        ew::concat_forward(&refs).map(Cow::Owned)
    }

    fn add(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T> {
        ew::add_forward(a, b).map(Cow::Owned)
    }

    fn mul(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T> {
        ew::mul_forward(a, b).map(Cow::Owned)
    }

    fn global_pool(&mut self, x: &Self::T, kind: PoolKind) -> Self::T {
        Cow::Owned(pool::global_pool_forward(x, kind))
    }

    fn channel_pool(&mut self, x: &Self::T, kind: PoolKind) -> Self::T {
        Cow::Owned(pool::channel_pool_forward(x, kind))
    }
}
