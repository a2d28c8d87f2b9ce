//! Supervised training: augmentation, the learning-rate schedule, Adam and
//! the epoch loop, plus thresholded single-model inference.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use strokeseg_autograd::{AutogradError, Backend, Dims, Gradients, Tape, Tensor};
use strokeseg_volume::linalg::{self, Mat4};
use strokeseg_volume::{interp, BinaryMask, CaseRecord, ProbabilityMap, VoxelGrid};

use crate::config::{AugmentationSpec, NetworkConfig, TrainConfig};
use crate::error::{CoreError, Result};
use crate::losses::supervised_loss;
use crate::network::{build_network, forward, forward_graph, Mode, NetworkWeights};

/// Probability at or above which a voxel is called lesion.
pub const THRESHOLD: f64 = 0.5;

/// Named random substreams. Every draw in training comes from
/// `stream(seed, purpose, a, b)`, so results do not depend on the order in
/// which cases or batches are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Shuffle = 1,
    Spatial,
    Intensity,
    Dropout,
    TargetShuffle,
    TargetSpatial,
    StudentIntensity,
    TeacherIntensity,
    TargetDropout,
}

pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, word) in [seed, purpose as u64, a, b].into_iter().enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Left-right flip, rotation about the IS axis and translation, all about
/// the grid centre and in voxel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialDraw {
    pub flip: bool,
    pub rotation_deg: f64,
    pub translation: [f64; 3],
}

impl SpatialDraw {
    pub const IDENTITY: SpatialDraw = SpatialDraw { flip: false, rotation_deg: 0.0, translation: [0.0; 3] };

    pub fn draw(spec: &AugmentationSpec, rng: &mut impl Rng) -> Self {
        let flip = rng.random_bool(spec.flip_prob);
        let rotation_deg = symmetric(rng, spec.max_rotation_deg);
        let translation = spec.max_translation.map(|t| symmetric(rng, t));
        Self { flip, rotation_deg, translation }
    }

    /// Maps input voxel coordinates to output voxel coordinates.
    pub fn matrix(&self, shape: [usize; 3]) -> Mat4 {
        let c = shape.map(|n| (n as f64 - 1.0) / 2.0);
        let flip = linalg::diag([if self.flip { -1.0 } else { 1.0 }, 1.0, 1.0]);
        let rot = linalg::rotation_z(self.rotation_deg.to_radians());
        let to_centre = linalg::translation(c.map(|v| -v));
        let back = linalg::translation([c[0] + self.translation[0], c[1] + self.translation[1], c[2] + self.translation[2]]);
        linalg::mul(&back, &linalg::mul(&rot, &linalg::mul(&flip, &to_centre)))
    }
}

fn symmetric(rng: &mut impl Rng, limit: f64) -> f64 {
    if limit == 0.0 {
        0.0
    } else {
        rng.random_range(-limit..=limit)
    }
}

/// Gamma and noise level for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityDraw {
    pub gamma: f64,
    pub sigma: f64,
}

impl IntensityDraw {
    pub fn draw(spec: &AugmentationSpec, rng: &mut impl Rng) -> Self {
        let [g0, g1] = spec.gamma_range;
        let [s0, s1] = spec.noise_sigma_range;
        Self { gamma: rng.random_range(g0..=g1), sigma: rng.random_range(s0..=s1) }
    }
}

/// Resamples `data` so that output voxel `q` reads the input at
/// `matrix⁻¹ q`. Trilinear for intensities, nearest for labels; outside
/// the field of view reads 0.
pub fn warp(data: &[f64], shape: [usize; 3], matrix: &Mat4, nearest: bool) -> Result<Vec<f64>> {
    if *matrix == linalg::identity() {
        return Ok(data.to_vec());
    }
    let inv = linalg::inverse(matrix).ok_or_else(|| CoreError::Config("singular spatial transform".into()))?;
    let mut out = vec![0.0; data.len()];
    let [nx, ny, _] = shape;
    for (i, o) in out.iter_mut().enumerate() {
        let q = [(i % nx) as f64, ((i / nx) % ny) as f64, (i / (nx * ny)) as f64];
        let p = linalg::apply(&inv, q);
        *o = if nearest { interp::nearest_index(shape, p).map_or(0.0, |j| data[j]) } else { interp::trilinear(data, shape, p) };
    }
    Ok(out)
}

/// Gamma correction on a min-max rescaled copy, mapped back to the original
/// range, followed by additive Gaussian noise.
pub fn adjust_intensity(data: &mut [f64], draw: IntensityDraw, rng: &mut impl Rng) {
    if draw.gamma != 1.0 {
        let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if hi > lo {
            for v in data.iter_mut() {
                *v = lo + (hi - lo) * ((*v - lo) / (hi - lo)).powf(draw.gamma);
            }
        }
    }
    if draw.sigma > 0.0 {
        let normal = Normal::new(0.0, draw.sigma).expect("positive sigma");
        for v in data.iter_mut() {
            *v += normal.sample(rng);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCase {
    pub dwi: Vec<f64>,
    pub adc: Vec<f64>,
    pub label: Option<Vec<f64>>,
    /// The spatial transform applied to every channel and the label.
    pub spatial: Mat4,
    pub intensity: [IntensityDraw; 2],
}

/// Applies one spatial draw to both channels and the label, then intensity
/// draws from `intensity_rng` to each channel independently.
pub fn augment_with(case: &CaseRecord, spatial: &SpatialDraw, spec: &AugmentationSpec, intensity_rng: &mut impl Rng) -> Result<AugmentedCase> {
    let shape = case.grid().shape();
    let m = spatial.matrix(shape);
    let mut dwi = warp(case.dwi.data(), shape, &m, false)?;
    let mut adc = warp(case.adc.data(), shape, &m, false)?;
    let label = match &case.label {
        Some(l) => {
            let raw: Vec<f64> = l.data().iter().map(|&v| f64::from(v)).collect();
            Some(warp(&raw, shape, &m, true)?)
        }
        None => None,
    };
    let intensity = [IntensityDraw::draw(spec, intensity_rng), IntensityDraw::draw(spec, intensity_rng)];
    adjust_intensity(&mut dwi, intensity[0], intensity_rng);
    adjust_intensity(&mut adc, intensity[1], intensity_rng);
    Ok(AugmentedCase { dwi, adc, label, spatial: m, intensity })
}

/// Full augmentation with every draw taken from `rng`.
pub fn augment(case: &CaseRecord, spec: &AugmentationSpec, rng: &mut impl Rng) -> Result<AugmentedCase> {
    let spatial = SpatialDraw::draw(spec, rng);
    augment_with(case, &spatial, spec, rng)
}

/// Linear decay from `lr_start` at step 0 to `lr_end` at `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, cfg: &TrainConfig) -> Result<f64> {
    if step > total_steps {
        return Err(CoreError::OutOfRange(format!("step {step} of {total_steps}")));
    }
    if total_steps == 0 {
        return Ok(cfg.lr_start);
    }
    let t = step as f64 / total_steps as f64;
    Ok(cfg.lr_start * (1.0 - t) + cfg.lr_end * t)
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }
}

impl Adam {
    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// One update. Parameters absent from `grads` see a zero gradient.
    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor>, grads: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (name, p) in params.iter_mut() {
            let n = p.numel();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let g = grads.get(name).map(Tensor::data);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                let gi = g.map_or(0.0, |g| g[i]);
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                *w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Rate used by the epoch's first step.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,lr\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.mean_loss, r.lr));
        }
        s
    }
}

/// Network input `[1, 2, x, y, z]` with DWI then ADC.
pub fn case_input(case: &CaseRecord) -> Result<Tensor> {
    let sp = case.grid().shape();
    let mut data = Vec::with_capacity(2 * case.grid().len());
    data.extend_from_slice(case.dwi.data());
    data.extend_from_slice(case.adc.data());
    Ok(Tensor::new(Dims::new(1, 2, sp), data)?)
}

pub(crate) fn ensure_common_grid(cases: &[CaseRecord], what: &'static str) -> Result<VoxelGrid> {
    let first = cases.first().ok_or(CoreError::Empty(what))?;
    for c in cases {
        first.grid().ensure_matches(c.grid(), &format!("{what} case {}", c.id))?;
    }
    Ok(first.grid().clone())
}

/// Augmented items stacked into `[B, 2, ..]` inputs and `[B, 1, ..]` labels.
pub(crate) struct Batch {
    pub input: Tensor,
    pub label: Option<Tensor>,
    pub items: Vec<AugmentedCase>,
}

pub(crate) fn stack(items: Vec<AugmentedCase>, sp: [usize; 3]) -> Result<Batch> {
    let n = items.len();
    let mut x = Vec::with_capacity(n * 2 * sp.iter().product::<usize>());
    let mut y = Vec::new();
    let labelled = items.iter().all(|a| a.label.is_some());
    for a in &items {
        x.extend_from_slice(&a.dwi);
        x.extend_from_slice(&a.adc);
        if let (true, Some(l)) = (labelled, &a.label) {
            y.extend_from_slice(l);
        }
    }
    let input = Tensor::new(Dims::new(n, 2, sp), x)?;
    let label = if labelled { Some(Tensor::new(Dims::new(n, 1, sp), y)?) } else { None };
    Ok(Batch { input, label, items })
}

/// Case order for one epoch.
pub(crate) fn epoch_order(n: usize, seed: u64, purpose: Purpose, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, purpose, epoch as u64, 0));
    order
}

/// Augmented source batch for `indices`, each case drawing from its own
/// `(epoch, case)` substream.
pub(crate) fn source_batch(cases: &[CaseRecord], indices: &[usize], cfg: &TrainConfig, epoch: usize) -> Result<Batch> {
    let sp = cases[0].grid().shape();
    let items = indices
        .iter()
        .map(|&i| augment(&cases[i], &cfg.augmentation, &mut stream(cfg.seed, Purpose::Spatial, epoch as u64, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    stack(items, sp)
}

/// Supervised loss and parameter gradients for one batch, with dropout
/// drawn from `dropout`.
pub fn supervised_gradients(weights: &NetworkWeights, input: &Tensor, label: &Tensor, cfg: &TrainConfig, dropout: &mut ChaCha8Rng) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(weights);
    let f = forward_graph(&mut tape, &weights.config, input.clone(), Some(dropout))?;
    let heads: Vec<&Tensor> = f.heads.iter().map(|h| tape.value(h)).collect();
    let (loss, seeds) = supervised_loss(&cfg.loss, &heads, label)?;
    if !loss.is_finite() {
        return Ok((loss, Gradients::new()));
    }
    let grads = tape.backward(f.heads.iter().copied().zip(seeds).collect())?;
    Ok((loss, grads))
}

pub(crate) fn check_labelled(cases: &[CaseRecord]) -> Result<()> {
    match cases.iter().find(|c| c.label.is_none()) {
        Some(c) => Err(CoreError::MissingLabel(c.id.clone())),
        None => Ok(()),
    }
}

/// Reports a blow-up anywhere in a step's forward pass as a non-finite loss
/// at that step.
pub(crate) fn at_step<T>(r: Result<T>, epoch: usize, step: usize) -> Result<T> {
    match r {
        Err(CoreError::Autograd(AutogradError::NonFinite(_))) => Err(CoreError::NonFiniteLoss { epoch, step }),
        other => other,
    }
}

/// Steps per epoch and in total.
pub(crate) fn step_counts(n: usize, cfg: &TrainConfig) -> (usize, usize) {
    let per_epoch = n.div_ceil(cfg.batch_size);
    (per_epoch, per_epoch * cfg.epochs)
}

pub fn train(dataset: &[CaseRecord], net: &NetworkConfig, cfg: &TrainConfig) -> Result<(NetworkWeights, TrainLog)> {
    train_with(dataset, net, cfg, &mut |_, _| Ok(()))
}

/// Trains from `build_network(net, cfg.seed)`, calling `on_epoch` after every
/// epoch with that epoch's record and the current weights.
pub fn train_with(
    dataset: &[CaseRecord],
    net: &NetworkConfig,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, &NetworkWeights) -> Result<()>,
) -> Result<(NetworkWeights, TrainLog)> {
    cfg.validate()?;
    ensure_common_grid(dataset, "training set")?;
    check_labelled(dataset)?;
    let mut weights = build_network(net, cfg.seed)?;
    let mut adam = Adam::default();
    let mut log = TrainLog::default();
    let (per_epoch, total) = step_counts(dataset.len(), cfg);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(dataset.len(), cfg.seed, Purpose::Shuffle, epoch);
        let lr0 = lr_at(step, total, cfg)?;
        let mut sum = 0.0;
        for (k, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = source_batch(dataset, idx, cfg, epoch)?;
            let label = batch.label.as_ref().expect("labelled set");
            let mut dropout = stream(cfg.seed, Purpose::Dropout, epoch as u64, k as u64);
            let (loss, grads) = at_step(supervised_gradients(&weights, &batch.input, label, cfg, &mut dropout), epoch, k)?;
            if !loss.is_finite() {
                return Err(CoreError::NonFiniteLoss { epoch, step: k });
            }
            adam.step(&mut weights.params, &grads, lr_at(step, total, cfg)?);
            sum += loss;
            step += 1;
        }
        let record = EpochRecord { epoch, mean_loss: sum / per_epoch as f64, lr: lr0 };
        on_epoch(&record, &weights)?;
        log.epochs.push(record);
    }
    Ok((weights, log))
}

/// Eval-mode final-head probabilities for one case.
pub fn predict_probability(weights: &NetworkWeights, case: &CaseRecord) -> Result<ProbabilityMap> {
    let out = forward(weights, &case_input(case)?, Mode::Eval)?;
    let p = out.prediction().data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(ProbabilityMap::new(case.grid().clone(), p)?)
}

/// Probability map and its `p >= 0.5` mask. The case must live on `grid`.
pub fn infer(weights: &NetworkWeights, case: &CaseRecord, grid: &VoxelGrid) -> Result<(ProbabilityMap, BinaryMask)> {
    grid.ensure_matches(case.grid(), &format!("case {}", case.id))?;
    let p = predict_probability(weights, case)?;
    let mask = p.threshold(THRESHOLD);
    Ok((p, mask))
}
