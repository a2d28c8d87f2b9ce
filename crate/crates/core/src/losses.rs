//! Segmentation losses with analytic gradients with respect to the predicted
//! probabilities. Every function works on one item; [`batch_loss`] averages
//! items of a batch.

use strokeseg_autograd::Tensor;

use crate::config::{LossConfig, LossKind};
use crate::error::{CoreError, Result};

/// Probability clamp used by the cross-entropy style terms.
pub const PROB_CLAMP: f64 = 1e-7;
/// Smoothing constant of the focal Tversky term.
pub const TVERSKY_EPS: f64 = 1e-7;

/// A loss value and its gradient with respect to each probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

fn check(p: &[f64], y: &[f64]) -> Result<()> {
    if p.len() != y.len() {
        return Err(CoreError::Shape(format!("prediction has {} voxels, target {}", p.len(), y.len())));
    }
    if p.is_empty() {
        return Err(CoreError::Empty("prediction"));
    }
    Ok(())
}

fn clamp(p: f64) -> (f64, f64) {
    // value and derivative of the clamp
    if p < PROB_CLAMP {
        (PROB_CLAMP, 0.0)
    } else if p > 1.0 - PROB_CLAMP {
        (1.0 - PROB_CLAMP, 0.0)
    } else {
        (p, 1.0)
    }
}

/// Generalised Dice loss over the lesion and background classes.
///
/// Class weights are `1 / max(n_c, 1)^2` for class volume `n_c`, normalised
/// to sum to one so that `eps` acts on a fixed scale.
pub fn gdl(p: &[f64], y: &[f64], eps: f64) -> Result<LossGrad> {
    check(p, y)?;
    let n1: f64 = y.iter().sum();
    let n0 = y.len() as f64 - n1;
    let raw = [1.0 / n0.max(1.0).powi(2), 1.0 / n1.max(1.0).powi(2)];
    let (w0, w1) = (raw[0] / (raw[0] + raw[1]), raw[1] / (raw[0] + raw[1]));
    let mut inter = 0.0;
    let mut sum = 0.0;
    for (&pi, &yi) in p.iter().zip(y) {
        inter += w1 * yi * pi + w0 * (1.0 - yi) * (1.0 - pi);
        sum += w1 * (yi + pi) + w0 * (2.0 - yi - pi);
    }
    let a = 2.0 * inter + eps;
    let b = sum + eps;
    let ds = w1 - w0;
    let grad = y
        .iter()
        .map(|&yi| {
            let di = w1 * yi - w0 * (1.0 - yi);
            -(2.0 * di * b - a * ds) / (b * b)
        })
        .collect();
    Ok(LossGrad { value: 1.0 - a / b, grad })
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce(p: &[f64], y: &[f64]) -> Result<LossGrad> {
    check(p, y)?;
    let n = p.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pi, &yi) in p.iter().zip(y) {
        let (q, dq) = clamp(pi);
        value -= yi * q.ln() + (1.0 - yi) * (1.0 - q).ln();
        grad.push(dq * (-yi / q + (1.0 - yi) / (1.0 - q)) / n);
    }
    Ok(LossGrad { value: value / n, grad })
}

pub fn gdl_bce(p: &[f64], y: &[f64], eps: f64) -> Result<LossGrad> {
    let a = gdl(p, y, eps)?;
    let b = bce(p, y)?;
    Ok(LossGrad { value: a.value + b.value, grad: a.grad.iter().zip(&b.grad).map(|(x, z)| x + z).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UflParams {
    pub lambda: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl UflParams {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if unit.contains(&self.lambda) && unit.contains(&self.delta) && (0.0..1.0).contains(&self.gamma) {
            Ok(())
        } else {
            Err(CoreError::Config(format!("invalid unified focal parameters {self:?}")))
        }
    }
}

/// Asymmetric unified focal loss:
/// `lambda * focal + (1 - lambda) * focal_tversky`.
///
/// The focal term weights lesion cross-entropy by `delta` and damps only the
/// background term by `(1 - p_bg)^gamma`. The Tversky term averages the
/// background complement `1 - TI_bg` and the enhanced lesion complement
/// `(1 - TI_fg)^(1 - gamma)`.
pub fn ufl(p: &[f64], y: &[f64], params: UflParams) -> Result<LossGrad> {
    check(p, y)?;
    params.validate()?;
    let UflParams { lambda, delta, gamma } = params;
    let n = p.len() as f64;
    let q: Vec<(f64, f64)> = p.iter().map(|&v| clamp(v)).collect();

    let mut focal = 0.0;
    let mut g_focal = Vec::with_capacity(p.len());
    for (&(qi, _), &yi) in q.iter().zip(y) {
        let pb = 1.0 - qi;
        let damp = (1.0 - pb).powf(gamma); // = qi^gamma
        let fore = -delta * yi * qi.ln();
        let back = -(1.0 - delta) * (1.0 - yi) * damp * pb.ln();
        focal += fore + back;
        // d/dq of fore: -delta*y/q; of back with pb = 1 - q:
        // -(1-delta)(1-y) [gamma q^(gamma-1) ln(1-q) - q^gamma / (1-q)]
        let d_fore = -delta * yi / qi;
        let d_back = if yi < 1.0 {
            let dq_damp = if gamma == 0.0 { 0.0 } else { gamma * qi.powf(gamma - 1.0) };
            -(1.0 - delta) * (1.0 - yi) * (dq_damp * pb.ln() - damp / pb)
        } else {
            0.0
        };
        g_focal.push((d_fore + d_back) / n);
    }
    focal /= n;

    // class sums: foreground uses (y, q), background uses (1 - y, 1 - q)
    let (mut tp_f, mut fn_f, mut fp_f) = (0.0, 0.0, 0.0);
    let (mut tp_b, mut fn_b, mut fp_b) = (0.0, 0.0, 0.0);
    for (&(qi, _), &yi) in q.iter().zip(y) {
        tp_f += yi * qi;
        fn_f += yi * (1.0 - qi);
        fp_f += (1.0 - yi) * qi;
        tp_b += (1.0 - yi) * (1.0 - qi);
        fn_b += (1.0 - yi) * qi;
        fp_b += yi * (1.0 - qi);
    }
    let ti = |tp: f64, fnn: f64, fp: f64| {
        let den = tp + delta * fnn + (1.0 - delta) * fp + TVERSKY_EPS;
        ((tp + TVERSKY_EPS) / den, den)
    };
    let (ti_f, den_f) = ti(tp_f, fn_f, fp_f);
    let (ti_b, den_b) = ti(tp_b, fn_b, fp_b);
    let comp_f = (1.0 - ti_f).max(0.0);
    let tversky = 0.5 * ((1.0 - ti_b) + comp_f.powf(1.0 - gamma));
    // dTI/dq per voxel: numerator' * den - num * den'
    let dl_dti_f = if comp_f > 0.0 { -0.5 * (1.0 - gamma) * comp_f.powf(-gamma) } else { 0.0 };
    let dl_dti_b = -0.5;
    let g_tv: Vec<f64> = y
        .iter()
        .map(|&yi| {
            // foreground: dtp = y, dfn = -y, dfp = 1 - y
            let dnum_f = yi;
            let dden_f = yi - delta * yi + (1.0 - delta) * (1.0 - yi);
            let dti_f = (dnum_f * den_f - (tp_f + TVERSKY_EPS) * dden_f) / (den_f * den_f);
            // background: dtp = -(1 - y), dfn = 1 - y, dfp = -y
            let dnum_b = -(1.0 - yi);
            let dden_b = -(1.0 - yi) + delta * (1.0 - yi) - (1.0 - delta) * yi;
            let dti_b = (dnum_b * den_b - (tp_b + TVERSKY_EPS) * dden_b) / (den_b * den_b);
            dl_dti_f * dti_f + dl_dti_b * dti_b
        })
        .collect();

    let value = lambda * focal + (1.0 - lambda) * tversky;
    let grad = q.iter().zip(g_focal.iter().zip(&g_tv)).map(|(&(_, dq), (gf, gt))| dq * (lambda * gf + (1.0 - lambda) * gt)).collect();
    Ok(LossGrad { value, grad })
}

/// `sum_i alpha_i L_i`.
pub fn ds_composite(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(CoreError::Shape(format!("{} head losses for {} weights", losses.len(), weights.len())));
    }
    Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
}

/// The configured loss on one item.
pub fn item_loss(cfg: &LossConfig, p: &[f64], y: &[f64]) -> Result<LossGrad> {
    match cfg.kind {
        LossKind::GdlBce => gdl_bce(p, y, cfg.gdl_epsilon),
        LossKind::Ufl => ufl(p, y, UflParams { lambda: cfg.ufl_lambda, delta: cfg.ufl_delta, gamma: cfg.ufl_gamma }),
    }
}

/// Mean of [`item_loss`] over the batch axis, with the gradient as a tensor
/// shaped like `p`.
pub fn batch_loss(cfg: &LossConfig, p: &Tensor, y: &Tensor) -> Result<(f64, Tensor)> {
    if p.dims() != y.dims() {
        return Err(CoreError::Shape(format!("prediction {} vs target {}", p.dims(), y.dims())));
    }
    let n = p.dims().n;
    let per = p.numel() / n;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(p.numel());
    for i in 0..n {
        let l = item_loss(cfg, &p.data()[i * per..(i + 1) * per], &y.data()[i * per..(i + 1) * per])?;
        total += l.value;
        grad.extend(l.grad.into_iter().map(|g| g / n as f64));
    }
    Ok((total / n as f64, Tensor::new(p.dims(), grad)?))
}

/// Loss over all heads of one forward pass: the deep-supervision composite
/// when there are six heads, the plain loss for a single head. Returns the
/// value and one gradient tensor per head.
pub fn supervised_loss(cfg: &LossConfig, heads: &[&Tensor], y: &Tensor) -> Result<(f64, Vec<Tensor>)> {
    let weights: &[f64] = match heads.len() {
        1 => &[1.0],
        6 => &cfg.ds_weights,
        n => return Err(CoreError::Shape(format!("{n} output heads"))),
    };
    let mut values = Vec::with_capacity(heads.len());
    let mut grads = Vec::with_capacity(heads.len());
    for (h, &w) in heads.iter().zip(weights) {
        let (v, mut g) = batch_loss(cfg, h, y)?;
        g.scale(w);
        values.push(v);
        grads.push(g);
    }
    Ok((ds_composite(&values, weights)?, grads))
}
