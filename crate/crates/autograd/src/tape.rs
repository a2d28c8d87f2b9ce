use std::collections::BTreeMap;

use crate::backend::{Backend, ParamSource, PoolKind};
use crate::error::{shape_err, AutogradError, Result};
use crate::kernels::{conv, elementwise as ew, norm, pool, resize};
use crate::tensor::{Dims, Tensor};
use crate::ConvGeom;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Parameter gradients keyed by parameter name.
pub type Gradients = BTreeMap<String, Tensor>;

enum Op {
    Param(String),
    Const,
    Conv { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    GroupNorm { x: Var, gamma: Var, beta: Var, groups: usize },
    LeakyRelu { x: Var, slope: f64 },
    Sigmoid { x: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    Resize { x: Var },
    Concat { parts: Vec<Var> },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    GlobalPool { x: Var, kind: PoolKind },
    ChannelPool { x: Var, kind: PoolKind },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recording backend. Every op appends a node; [`Tape::backward`] walks the
/// nodes in reverse.
pub struct Tape<'a> {
    params: &'a dyn ParamSource,
    nodes: Vec<Node>,
    param_vars: BTreeMap<String, Var>,
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a dyn ParamSource) -> Self {
        Self { params, nodes: Vec::new(), param_vars: BTreeMap::new() }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Back-propagates the given output gradients. Parameters that were read
    /// but receive no gradient are reported as zeros.
    pub fn backward(self, seeds: Vec<(Var, Tensor)>) -> Result<Gradients> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            if g.dims() != self.val(v).dims() {
                return Err(shape_err("backward", format!("seed {} for value {}", g.dims(), self.val(v).dims())));
            }
            accumulate(&mut grads, v, g);
        }
        let mut out = Gradients::new();
        let mut nodes = self.nodes;
        for i in (0..nodes.len()).rev() {
            let node = &nodes[i];
            let Some(gy) = grads[i].take() else {
                if let Op::Param(name) = &node.op {
                    out.insert(name.clone(), Tensor::zeros(node.value.dims()));
                }
                continue;
            };
            let v = |x: &Var| &nodes[x.0].value;
            match &node.op {
                Op::Param(name) => {
                    out.insert(name.clone(), gy);
                }
                Op::Const => {}
                Op::Conv { x, w, b, geom } => {
                    let (gx, gw, gb) = conv::conv3d_backward(v(x), v(w), b.is_some(), geom, &gy)?;
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    if let (Some(b), Some(gb)) = (b, gb) {
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::GroupNorm { x, gamma, beta, groups } => {
                    let (gx, gg, gb) = norm::group_norm_backward(v(x), v(gamma), *groups, &gy)?;
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, gg);
                    accumulate(&mut grads, *beta, gb);
                }
                Op::LeakyRelu { x, slope } => {
                    let gx = ew::leaky_relu_backward(v(x), *slope, &gy);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sigmoid { x } => {
                    let gx = ew::sigmoid_backward(&node.value, &gy);
                    accumulate(&mut grads, *x, gx);
                }
                Op::MaxPool { x, argmax } => {
                    let gx = pool::max_pool_backward(v(x).dims(), argmax, &gy);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Resize { x } => {
                    let gx = resize::resize_backward(v(x).dims(), &gy);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Concat { parts } => {
                    let channels: Vec<usize> = parts.iter().map(|p| v(p).dims().c).collect();
                    for (p, g) in parts.iter().zip(ew::concat_backward(&channels, &gy)) {
                        accumulate(&mut grads, *p, g);
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, gy.clone());
                    accumulate(&mut grads, *b, gy);
                }
                Op::Mul { a, b } => {
                    let (ga, gb) = ew::mul_backward(v(a), v(b), &gy);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::GlobalPool { x, kind } => {
                    let gx = pool::global_pool_backward(v(x), *kind, &gy);
                    accumulate(&mut grads, *x, gx);
                }
                Op::ChannelPool { x, kind } => {
                    let gx = pool::channel_pool_backward(v(x), *kind, &gy);
                    accumulate(&mut grads, *x, gx);
                }
            }
            // Activations are no longer needed once their gradient has been used.
            if !matches!(nodes[i].op, Op::Param(_)) {
                nodes[i].value = Tensor::zeros(Dims::new(0, 0, [0, 0, 0]));
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

impl Backend for Tape<'_> {
    type T = Var;

    fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.param_vars.get(name) {
            return Ok(v);
        }
        let t = self.params.param(name).ok_or_else(|| AutogradError::UnknownParam(name.to_string()))?.clone();
        let v = self.push(t, Op::Param(name.to_string()));
        self.param_vars.insert(name.to_string(), v);
        Ok(v)
    }

    fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Const)
    }

    fn value<'v>(&'v self, v: &'v Var) -> &'v Tensor {
        self.val(*v)
    }

    fn conv3d(&mut self, x: &Var, w: &Var, b: Option<&Var>, geom: ConvGeom) -> Result<Var> {
        let y = conv::conv3d_forward(self.val(*x), self.val(*w), b.map(|b| self.val(*b)), &geom)?;
        Ok(self.push(y, Op::Conv { x: *x, w: *w, b: b.copied(), geom }))
    }

    fn group_norm(&mut self, x: &Var, gamma: &Var, beta: &Var, groups: usize) -> Result<Var> {
        let y = norm::group_norm_forward(self.val(*x), self.val(*gamma), self.val(*beta), groups)?;
        Ok(self.push(y, Op::GroupNorm { x: *x, gamma: *gamma, beta: *beta, groups }))
    }

    fn leaky_relu(&mut self, x: &Var, slope: f64) -> Var {
        let y = ew::leaky_relu_forward(self.val(*x), slope);
        self.push(y, Op::LeakyRelu { x: *x, slope })
    }

    fn sigmoid(&mut self, x: &Var) -> Var {
        let y = ew::sigmoid_forward(self.val(*x));
        self.push(y, Op::Sigmoid { x: *x })
    }

    fn max_pool(&mut self, x: &Var, window: [usize; 3]) -> Result<Var> {
        let (y, argmax) = pool::max_pool_forward(self.val(*x), window)?;
        Ok(self.push(y, Op::MaxPool { x: *x, argmax }))
    }

    fn resize(&mut self, x: &Var, target: [usize; 3]) -> Var {
        let y = resize::resize_forward(self.val(*x), target);
        self.push(y, Op::Resize { x: *x })
    }

    fn concat(&mut self, parts: &[&Var]) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.val(**p)).collect();
        let y = ew::concat_forward(&refs)?;
        Ok(self.push(y, Op::Concat { parts: parts.iter().map(|p| **p).collect() }))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = ew::add_forward(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Add { a: *a, b: *b }))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = ew::mul_forward(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Mul { a: *a, b: *b }))
    }

    fn global_pool(&mut self, x: &Var, kind: PoolKind) -> Var {
        let y = pool::global_pool_forward(self.val(*x), kind);
        self.push(y, Op::GlobalPool { x: *x, kind })
    }

    fn channel_pool(&mut self, x: &Var, kind: PoolKind) -> Var {
        let y = pool::channel_pool_forward(self.val(*x), kind);
        self.push(y, Op::ChannelPool { x: *x, kind })
    }
}
