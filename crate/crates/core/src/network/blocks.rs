//! Building blocks of the U-Net family, written once against [`Backend`].
//!
//! Every block reads its parameters by name below a prefix, e.g. an SE block
//! at `enc2/se` reads `enc2/se/fc1/w`, `enc2/se/fc1/b`, `enc2/se/fc2/w`, ...

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use strokeseg_autograd::{Backend, ConvGeom, PoolKind, Tensor};

use crate::error::Result;

pub const LEAKY_SLOPE: f64 = 0.3;
pub const STD_KERNEL: [usize; 3] = [4, 4, 2];
pub const RES_KERNEL: [usize; 3] = [3, 3, 2];
pub const DOWN: [usize; 3] = [2, 2, 1];
pub const CBAM_KERNEL: [usize; 3] = [7, 7, 3];

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)`.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: &'r mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn apply<B: Backend>(&mut self, b: &mut B, x: B::T) -> Result<B::T> {
        if self.rate == 0.0 {
            return Ok(x);
        }
        let dims = b.value(&x).dims();
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = (0..dims.numel()).map(|_| if self.rng.random_bool(keep) { 1.0 / keep } else { 0.0 }).collect();
        let m = b.input(Tensor::new(dims, mask)?);
        Ok(b.mul(&x, &m)?)
    }
}

pub(crate) fn maybe_dropout<B: Backend>(b: &mut B, x: B::T, dropout: &mut Option<&mut Dropout>) -> Result<B::T> {
    match dropout {
        Some(d) => d.apply(b, x),
        None => Ok(x),
    }
}

pub fn conv<B: Backend>(b: &mut B, x: &B::T, name: &str, geom: ConvGeom, bias: bool) -> Result<B::T> {
    let w = b.param(&format!("{name}/w"))?;
    let bv = if bias { Some(b.param(&format!("{name}/b"))?) } else { None };
    Ok(b.conv3d(x, &w, bv.as_ref(), geom)?)
}

pub fn group_norm<B: Backend>(b: &mut B, x: &B::T, name: &str, groups: usize) -> Result<B::T> {
    let gamma = b.param(&format!("{name}/gamma"))?;
    let beta = b.param(&format!("{name}/beta"))?;
    Ok(b.group_norm(x, &gamma, &beta, groups)?)
}

/// Two `Conv(4x4x2) -> GN -> LeakyReLU(0.3)` sequences, each optionally
/// followed by dropout. Spatial shape is preserved.
pub fn std_block<B: Backend>(b: &mut B, x: &B::T, prefix: &str, groups: usize, mut dropout: Option<&mut Dropout>) -> Result<B::T> {
    let h = std_sequence(b, x, prefix, 1, groups)?;
    let h = maybe_dropout(b, h, &mut dropout)?;
    let h = std_sequence(b, &h, prefix, 2, groups)?;
    maybe_dropout(b, h, &mut dropout)
}

fn std_sequence<B: Backend>(b: &mut B, x: &B::T, prefix: &str, i: usize, groups: usize) -> Result<B::T> {
    let h = conv(b, x, &format!("{prefix}/conv{i}"), ConvGeom::same(STD_KERNEL), true)?;
    let h = group_norm(b, &h, &format!("{prefix}/gn{i}"), groups)?;
    Ok(b.leaky_relu(&h, LEAKY_SLOPE))
}

/// Residual block `main(x) + proj(x)` with a 1x1x1 projection.
///
/// The first block of the network uses `Conv -> GN -> ReLU -> Conv`; all
/// others use two pre-activation `GN -> ReLU -> Conv` sequences, the first
/// convolution being 4x4x2 with the given stride when it downsamples.
/// Dropout sits before the last convolution.
pub fn res_block<B: Backend>(
    b: &mut B,
    x: &B::T,
    prefix: &str,
    groups: usize,
    first: bool,
    stride: [usize; 3],
    mut dropout: Option<&mut Dropout>,
) -> Result<B::T> {
    let down = stride != [1, 1, 1];
    let k1 = if down { STD_KERNEL } else { RES_KERNEL };
    let g1 = ConvGeom::strided(k1, stride);
    let g2 = ConvGeom::same(RES_KERNEL);
    let mut h = if first {
        let h = conv(b, x, &format!("{prefix}/conv1"), g1, true)?;
        let h = group_norm(b, &h, &format!("{prefix}/gn1"), groups)?;
        b.relu(&h)
    } else {
        let h = group_norm(b, x, &format!("{prefix}/gn1"), groups)?;
        let h = b.relu(&h);
        let h = conv(b, &h, &format!("{prefix}/conv1"), g1, true)?;
        let h = group_norm(b, &h, &format!("{prefix}/gn2"), groups)?;
        b.relu(&h)
    };
    h = maybe_dropout(b, h, &mut dropout)?;
    let main = conv(b, &h, &format!("{prefix}/conv2"), g2, true)?;
    let proj = conv(b, x, &format!("{prefix}/proj"), ConvGeom::valid(stride), true)?;
    Ok(b.add(&main, &proj)?)
}

/// Squeeze-and-excitation: `x * sigmoid(fc2(relu(fc1(avgpool(x)))))`.
pub fn se_block<B: Backend>(b: &mut B, x: &B::T, prefix: &str) -> Result<B::T> {
    let s = b.global_pool(x, PoolKind::Avg);
    let s = conv(b, &s, &format!("{prefix}/fc1"), ConvGeom::same([1, 1, 1]), true)?;
    let s = b.relu(&s);
    let s = conv(b, &s, &format!("{prefix}/fc2"), ConvGeom::same([1, 1, 1]), true)?;
    let s = b.sigmoid(&s);
    Ok(b.mul(x, &s)?)
}

/// Geometry of the gate's skip-side projection: a 2x2x1 kernel with stride
/// 2x2x1, padded on the high side so odd extents round up like pooling.
pub fn gate_theta_geom() -> ConvGeom {
    ConvGeom { stride: DOWN, pad_lo: [0; 3], pad_hi: [1, 1, 0] }
}

/// Additive attention gate. `xe` is the skip connection and `g` the gating
/// signal one level coarser. Returns the gated skip and the coefficients
/// resampled onto the skip grid (1 channel in spatial mode, one per skip
/// channel in hybrid mode).
pub fn attention_gate<B: Backend>(b: &mut B, xe: &B::T, g: &B::T, prefix: &str) -> Result<(B::T, B::T)> {
    let theta = conv(b, xe, &format!("{prefix}/theta"), gate_theta_geom(), false)?;
    let phi = conv(b, g, &format!("{prefix}/phi"), ConvGeom::same([1, 1, 1]), true)?;
    let f = b.add(&theta, &phi)?;
    let f = b.relu(&f);
    let psi = conv(b, &f, &format!("{prefix}/psi"), ConvGeom::same([1, 1, 1]), true)?;
    let a = b.sigmoid(&psi);
    let target = b.value(xe).dims().sp;
    let a = b.resize(&a, target);
    let out = b.mul(xe, &a)?;
    Ok((out, a))
}

/// Channel attention (shared MLP over average- and max-pooled descriptors)
/// followed by spatial attention (7x7x3 convolution over the channel-wise
/// average and maximum maps).
pub fn cbam_block<B: Backend>(b: &mut B, x: &B::T, prefix: &str) -> Result<B::T> {
    let pw = ConvGeom::same([1, 1, 1]);
    let mlp = |b: &mut B, v: &B::T| -> Result<B::T> {
        let h = conv(b, v, &format!("{prefix}/fc1"), pw, true)?;
        let h = b.relu(&h);
        conv(b, &h, &format!("{prefix}/fc2"), pw, true)
    };
    let avg = b.global_pool(x, PoolKind::Avg);
    let max = b.global_pool(x, PoolKind::Max);
    let ca = mlp(b, &avg)?;
    let cm = mlp(b, &max)?;
    let c = b.add(&ca, &cm)?;
    let c = b.sigmoid(&c);
    let x1 = b.mul(x, &c)?;
    let avg = b.channel_pool(&x1, PoolKind::Avg);
    let max = b.channel_pool(&x1, PoolKind::Max);
    let maps = b.concat(&[&avg, &max])?;
    let s = conv(b, &maps, &format!("{prefix}/spatial"), ConvGeom::same(CBAM_KERNEL), true)?;
    let s = b.sigmoid(&s);
    Ok(b.mul(&x1, &s)?)
}

/// Output head: 1x1x1 convolution to one channel, trilinear upsampling to
/// `full`, sigmoid.
pub fn head<B: Backend>(b: &mut B, x: &B::T, prefix: &str, full: [usize; 3]) -> Result<B::T> {
    let h = conv(b, x, prefix, ConvGeom::same([1, 1, 1]), true)?;
    let h = b.resize(&h, full);
    Ok(b.sigmoid(&h))
}

/// Spatial extent after `level - 1` downsamplings of `full`.
pub fn level_extent(full: [usize; 3], level: usize) -> [usize; 3] {
    let mut s = full;
    for _ in 1..level {
        for a in 0..3 {
            s[a] = s[a].div_ceil(DOWN[a]);
        }
    }
    s
}
