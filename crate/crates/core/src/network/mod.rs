//! The configurable 3D U-Net: five encoder levels, a bottleneck and five
//! decoder levels, with optional attention modules and deep supervision.
//!
//! Downsampling halves the left-right and anterior-posterior extents
//! (rounding up) and never touches the inferior-superior axis. Decoder levels
//! upsample the coarser features trilinearly onto the skip connection's grid
//! and concatenate `[upsampled, skip]`.

pub mod blocks;
pub mod layout;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use strokeseg_autograd::kernels::resize::resize_forward;
use strokeseg_autograd::{Backend, Eval, ParamSource, Tensor};

use crate::config::{AttentionKind, BlockKind, NetworkConfig};
use crate::error::{CoreError, Result};
use blocks::{Dropout, DOWN};
use layout::{param_specs, Init};

/// Named parameters plus the configuration they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub config: NetworkConfig,
    pub params: BTreeMap<String, Tensor>,
}

impl ParamSource for NetworkWeights {
    fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }
}

impl NetworkWeights {
    /// Wraps loaded parameters after checking them against the configuration.
    pub fn from_params(config: NetworkConfig, params: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != params.len() {
            return Err(CoreError::KeyMismatch(format!("expected {} tensors, got {}", specs.len(), params.len())));
        }
        for s in &specs {
            match params.get(&s.name) {
                None => return Err(CoreError::KeyMismatch(format!("missing {}", s.name))),
                Some(t) if t.dims() != s.dims => {
                    return Err(CoreError::Shape(format!("{} is {}, expected {}", s.name, t.dims(), s.dims)));
                }
                Some(t) if !t.all_finite() => return Err(CoreError::Config(format!("{} holds non-finite values", s.name))),
                _ => {}
            }
        }
        Ok(Self { config, params })
    }

    pub fn same_keys(&self, other: &NetworkWeights) -> bool {
        self.params.len() == other.params.len() && self.params.iter().zip(&other.params).all(|((a, x), (b, y))| a == b && x.dims() == y.dims())
    }

    pub fn ensure_same_keys(&self, other: &NetworkWeights) -> Result<()> {
        if self.same_keys(other) {
            Ok(())
        } else {
            Err(CoreError::KeyMismatch("weight sets have different keys or shapes".into()))
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }
}

/// Builds a freshly initialised network. The same `(config, seed)` always
/// yields the same weights.
pub fn build_network(config: &NetworkConfig, seed: u64) -> Result<NetworkWeights> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = BTreeMap::new();
    for spec in param_specs(config) {
        let n = spec.dims.numel();
        let data = match spec.init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Kaiming | Init::FanIn => {
                let gain = if spec.init == Init::Kaiming { 2.0 } else { 1.0 };
                let fan_in = spec.dims.c * spec.dims.spatial();
                let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
        };
        params.insert(spec.name, Tensor::new(spec.dims, data)?);
    }
    Ok(NetworkWeights { config: config.clone(), params })
}

/// Forward pass products in backend values.
pub struct Forward<T> {
    /// Probability heads, bottleneck first; the last one is the prediction.
    pub heads: Vec<T>,
    /// Gate coefficients per level (`att1` .. `att5`) on each skip's grid.
    pub gates: Vec<(String, T)>,
}

/// Runs the network on `input` (`[n, 2, x, y, z]`) with any backend. With
/// `dropout_rng` set, dropout is active in the bottleneck and the two
/// coarsest decoder levels.
pub fn forward_graph<B: Backend>(b: &mut B, cfg: &NetworkConfig, input: Tensor, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Forward<B::T>> {
    let d = input.dims();
    if d.c != 2 {
        return Err(CoreError::Shape(format!("network input needs 2 channels (DWI, ADC), got {}", d.c)));
    }
    if !input.all_finite() {
        return Err(CoreError::Config("network input holds non-finite values".into()));
    }
    let full = d.sp;
    let groups = cfg.gn_groups;
    let mut dropout = dropout_rng.map(|rng| Dropout { rate: cfg.dropout_rate, rng });
    let x = b.input(input);

    let mut encs: Vec<B::T> = Vec::with_capacity(5);
    for i in 1..=5 {
        let name = format!("enc{i}");
        let src = if i == 1 { &x } else { &encs[i - 2] };
        let mut h = match cfg.block {
            BlockKind::StdUNet if i == 1 => blocks::std_block(b, src, &name, groups, None)?,
            BlockKind::StdUNet => {
                let p = b.max_pool(src, DOWN)?;
                blocks::std_block(b, &p, &name, groups, None)?
            }
            BlockKind::ResUNet => blocks::res_block(b, src, &name, groups, i == 1, if i == 1 { [1, 1, 1] } else { DOWN }, None)?,
        };
        if cfg.attention == AttentionKind::CBAM {
            h = blocks::cbam_block(b, &h, &format!("{name}/cbam"))?;
        }
        b.ensure_finite(&h, &name)?;
        encs.push(h);
    }

    let bot = match cfg.block {
        BlockKind::StdUNet => {
            let p = b.max_pool(&encs[4], DOWN)?;
            blocks::std_block(b, &p, "bot", groups, dropout.as_mut())?
        }
        BlockKind::ResUNet => blocks::res_block(b, &encs[4], "bot", groups, false, DOWN, dropout.as_mut())?,
    };
    b.ensure_finite(&bot, "bot")?;

    // levels[0] is the bottleneck, then dec5 .. dec1
    let mut levels: Vec<B::T> = vec![bot];
    let mut gates = Vec::new();
    for i in (1..=5).rev() {
        let name = format!("dec{i}");
        let coarse = levels.last().expect("bottleneck present");
        let mut skip = encs[i - 1].clone();
        if cfg.attention.has_se() {
            skip = blocks::se_block(b, &skip, &format!("enc{i}/se"))?;
        }
        if cfg.attention.has_gate() {
            let (gated, a) = blocks::attention_gate(b, &skip, coarse, &format!("att{i}"))?;
            b.ensure_finite(&gated, &format!("att{i}"))?;
            gates.push((format!("att{i}"), a));
            skip = gated;
        }
        let target = b.value(&skip).dims().sp;
        let up = b.resize(coarse, target);
        let cat = b.concat(&[&up, &skip])?;
        let drop = if i >= 4 { dropout.as_mut() } else { None };
        let h = match cfg.block {
            BlockKind::StdUNet => blocks::std_block(b, &cat, &name, groups, drop)?,
            BlockKind::ResUNet => blocks::res_block(b, &cat, &name, groups, false, [1, 1, 1], drop)?,
        };
        b.ensure_finite(&h, &name)?;
        levels.push(h);
    }
    gates.reverse();

    let mut heads = Vec::with_capacity(cfg.head_count());
    for k in 1..=6 {
        if cfg.deep_supervision || k == 6 {
            let name = format!("head{k}");
            let h = blocks::head(b, &levels[k - 1], &name, full)?;
            b.ensure_finite(&h, &name)?;
            heads.push(h);
        }
    }
    Ok(Forward { heads, gates })
}

#[derive(Debug)]
pub enum Mode<'r> {
    Eval,
    /// Dropout active, drawing masks from the given stream.
    Train(&'r mut ChaCha8Rng),
}

/// Materialised forward output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Full-resolution probability tensors, bottleneck head first.
    pub outputs: Vec<Tensor>,
    /// Gate coefficients on the input grid, keyed `att1` .. `att5`.
    pub attention_maps: BTreeMap<String, Tensor>,
}

impl ForwardOutput {
    pub fn prediction(&self) -> &Tensor {
        self.outputs.last().expect("at least one head")
    }
}

pub fn forward(weights: &NetworkWeights, input: &Tensor, mode: Mode) -> Result<ForwardOutput> {
    let rng = match mode {
        Mode::Eval => None,
        Mode::Train(r) => Some(r),
    };
    let full = input.dims().sp;
    let mut e = Eval::new(weights);
    let f = forward_graph(&mut e, &weights.config, input.clone(), rng)?;
    let attention_maps = f.gates.into_iter().map(|(k, a)| (k, upsample_full(&a, full))).collect();
    Ok(ForwardOutput { outputs: f.heads.into_iter().map(|t| t.into_owned()).collect(), attention_maps })
}

fn upsample_full(a: &Tensor, full: [usize; 3]) -> Tensor {
    resize_forward(a, full)
}

/// Attention-gate coefficients of every gated level, upsampled to the input
/// grid (the finest level already lives there).
pub fn extract_attention_maps(weights: &NetworkWeights, input: &Tensor) -> Result<BTreeMap<String, Tensor>> {
    if !weights.config.attention.has_gate() {
        return Err(CoreError::Config(format!("attention kind {:?} has no gates", weights.config.attention)));
    }
    Ok(forward(weights, input, Mode::Eval)?.attention_maps)
}
