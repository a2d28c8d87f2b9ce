//! Mean Teacher adaptation: a student trained on labelled source data plus a
//! consistency term on unlabelled target data, and a teacher that tracks the
//! student as an exponential moving average.

use strokeseg_autograd::{Backend, Gradients, Tape, Tensor};
use strokeseg_volume::linalg::Mat4;
use strokeseg_volume::{CaseRecord, Domain};

use crate::config::{MTConfig, NetworkConfig};
use crate::error::{CoreError, Result};
use crate::network::{build_network, forward, forward_graph, Mode, NetworkWeights};
use crate::training::{
    at_step, augment_with, check_labelled, ensure_common_grid, epoch_order, lr_at, source_batch, stack, step_counts, stream, supervised_gradients, Adam,
    Batch, IntensityDraw, Purpose, SpatialDraw,
};

/// `teacher ← α·teacher + (1 − α)·student`, parameter by parameter, written
/// as `student + α·(teacher − student)` so that equal weights stay bitwise
/// equal and `α = 0` copies the student exactly.
pub fn ema_update(teacher: &mut NetworkWeights, student: &NetworkWeights, alpha: f64) -> Result<()> {
    teacher.ensure_same_keys(student)?;
    for (t, s) in teacher.params.values_mut().zip(student.params.values()) {
        for (a, b) in t.data_mut().iter_mut().zip(s.data()) {
            *a = b + alpha * (*a - b);
        }
    }
    Ok(())
}

/// Mean squared difference between two probability tensors, with its
/// gradient with respect to the first.
pub fn consistency_loss(student: &Tensor, teacher: &Tensor) -> Result<(f64, Tensor)> {
    if student.dims() != teacher.dims() {
        return Err(CoreError::Shape(format!("student {} vs teacher {}", student.dims(), teacher.dims())));
    }
    let n = student.numel() as f64;
    let mut sum = 0.0;
    let grad = student
        .data()
        .iter()
        .zip(teacher.data())
        .map(|(s, t)| {
            let d = s - t;
            sum += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((sum / n, Tensor::new(student.dims(), grad)?))
}

/// Consistency weight at `epoch`: `γ·exp(−5(1 − t)²)` with `t` the clamped
/// ramp-up fraction.
pub fn rampup_weight(epoch: usize, cfg: &MTConfig) -> f64 {
    if cfg.rampup_epochs == 0 || epoch >= cfg.rampup_epochs {
        return cfg.consistency_weight;
    }
    let t = epoch as f64 / cfg.rampup_epochs as f64;
    cfg.consistency_weight * (-5.0 * (1.0 - t) * (1.0 - t)).exp()
}

/// EMA decay at `epoch`: the ramp-up value before `rampup_epochs`, the final
/// value from then on.
pub fn ema_decay(epoch: usize, cfg: &MTConfig) -> f64 {
    if epoch < cfg.rampup_epochs {
        cfg.ema_decay_rampup
    } else {
        cfg.ema_decay_final
    }
}

/// The teacher shares the student's architecture but never drops out.
pub fn teacher_config(student: &NetworkConfig) -> NetworkConfig {
    NetworkConfig { dropout_rate: 0.0, ..student.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchRole {
    /// Labelled batch feeding the supervised loss.
    Supervised,
    /// Target batch as seen by the student.
    Student,
    /// The same target batch as seen by the teacher.
    Teacher,
}

/// What went into one network pass, for instrumentation.
#[derive(Debug, Clone)]
pub struct BatchEvent {
    pub epoch: usize,
    pub step: usize,
    pub role: BatchRole,
    pub case_ids: Vec<String>,
    pub domains: Vec<Domain>,
    pub spatial: Vec<Mat4>,
    pub intensity: Vec<[IntensityDraw; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtEpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
    pub consistency_weight_effective: f64,
    pub ema_decay: f64,
    pub sup_loss: f64,
    pub cons_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MtLog {
    pub epochs: Vec<MtEpochRecord>,
}

impl MtLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,lr,consistency_weight_effective,ema_decay,sup_loss,cons_loss\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{},{},{},{},{}\n", r.epoch, r.mean_loss, r.lr, r.consistency_weight_effective, r.ema_decay, r.sup_loss, r.cons_loss));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct MtOutcome {
    pub student: NetworkWeights,
    pub teacher: NetworkWeights,
    pub log: MtLog,
}

/// Optional callbacks into [`train_mt_with`].
#[derive(Default)]
pub struct MtHooks<'a> {
    pub on_batch: Option<&'a mut dyn FnMut(&BatchEvent)>,
    /// Called after each step's EMA update with (student, teacher).
    pub on_step: Option<&'a mut dyn FnMut(&NetworkWeights, &NetworkWeights)>,
    pub on_epoch: Option<&'a mut dyn FnMut(&MtEpochRecord, &NetworkWeights, &NetworkWeights) -> Result<()>>,
}

fn event(batch: &Batch, cases: &[&CaseRecord], epoch: usize, step: usize, role: BatchRole) -> BatchEvent {
    BatchEvent {
        epoch,
        step,
        role,
        case_ids: cases.iter().map(|c| c.id.clone()).collect(),
        domains: cases.iter().map(|c| c.domain).collect(),
        spatial: batch.items.iter().map(|a| a.spatial).collect(),
        intensity: batch.items.iter().map(|a| a.intensity).collect(),
    }
}

/// Student and teacher views of one target batch: shared spatial draws,
/// independent intensity draws. Labels are never read.
fn target_views(cases: &[&CaseRecord], cfg: &MTConfig, epoch: usize, step: usize) -> Result<(Batch, Batch)> {
    let aug = &cfg.base.augmentation;
    let seed = cfg.base.seed;
    let sp = cases[0].grid().shape();
    let mut student = Vec::with_capacity(cases.len());
    let mut teacher = Vec::with_capacity(cases.len());
    for (j, case) in cases.iter().enumerate() {
        let unlabelled = CaseRecord { label: None, ..(*case).clone() };
        let pos = (step * cfg.base.batch_size + j) as u64;
        let spatial = SpatialDraw::draw(aug, &mut stream(seed, Purpose::TargetSpatial, epoch as u64, pos));
        student.push(augment_with(&unlabelled, &spatial, aug, &mut stream(seed, Purpose::StudentIntensity, epoch as u64, pos))?);
        teacher.push(augment_with(&unlabelled, &spatial, aug, &mut stream(seed, Purpose::TeacherIntensity, epoch as u64, pos))?);
    }
    Ok((stack(student, sp)?, stack(teacher, sp)?))
}

/// Consistency loss between the student's final head (train mode, dropout
/// from `dropout`) and the teacher's eval-mode prediction, and its gradients
/// with respect to the student scaled by `weight`. The teacher output enters
/// as a constant.
pub fn consistency_gradients(
    student: &NetworkWeights,
    teacher: &NetworkWeights,
    student_input: &Tensor,
    teacher_input: &Tensor,
    weight: f64,
    dropout: &mut rand_chacha::ChaCha8Rng,
) -> Result<(f64, Gradients)> {
    let target = forward(teacher, teacher_input, Mode::Eval)?.prediction().clone();
    let mut tape = Tape::new(student);
    let f = forward_graph(&mut tape, &student.config, student_input.clone(), Some(dropout))?;
    let last = *f.heads.last().expect("final head");
    let (loss, mut grad) = consistency_loss(tape.value(&last), &target)?;
    grad.scale(weight);
    Ok((loss, tape.backward(vec![(last, grad)])?))
}

pub fn train_mt(source: &[CaseRecord], target: &[CaseRecord], net: &NetworkConfig, cfg: &MTConfig) -> Result<MtOutcome> {
    train_mt_with(source, target, net, cfg, MtHooks::default())
}

/// Runs Mean Teacher training and returns both networks; the teacher is the
/// model used for prediction. Source batching, source augmentation and
/// student dropout use the same substreams as plain training, so with a
/// zero consistency weight the student follows the supervised trajectory.
pub fn train_mt_with(source: &[CaseRecord], target: &[CaseRecord], net: &NetworkConfig, cfg: &MTConfig, mut hooks: MtHooks) -> Result<MtOutcome> {
    cfg.validate()?;
    let base = &cfg.base;
    let grid = ensure_common_grid(source, "source set")?;
    let target_grid = ensure_common_grid(target, "target set")?;
    grid.ensure_matches(&target_grid, "target vs source grid")?;
    check_labelled(source)?;

    let mut student = build_network(net, base.seed)?;
    let mut teacher = NetworkWeights { config: teacher_config(net), params: student.params.clone() };
    let mut adam = Adam::default();
    let mut log = MtLog::default();
    let (per_epoch, total) = step_counts(source.len(), base);
    let mut step = 0;
    for epoch in 0..base.epochs {
        let order = epoch_order(source.len(), base.seed, Purpose::Shuffle, epoch);
        let target_order = epoch_order(target.len(), base.seed, Purpose::TargetShuffle, epoch);
        let weight = rampup_weight(epoch, cfg);
        let alpha = ema_decay(epoch, cfg);
        let lr0 = lr_at(step, total, base)?;
        let (mut sup_sum, mut cons_sum, mut total_sum) = (0.0, 0.0, 0.0);
        for (k, idx) in order.chunks(base.batch_size).enumerate() {
            let batch = source_batch(source, idx, base, epoch)?;
            if let Some(f) = hooks.on_batch.as_mut() {
                let cases: Vec<&CaseRecord> = idx.iter().map(|&i| &source[i]).collect();
                f(&event(&batch, &cases, epoch, k, BatchRole::Supervised));
            }
            let label = batch.label.as_ref().expect("labelled set");
            let mut dropout = stream(base.seed, Purpose::Dropout, epoch as u64, k as u64);
            let (sup, mut grads) = at_step(supervised_gradients(&student, &batch.input, label, base, &mut dropout), epoch, k)?;

            let tcases: Vec<&CaseRecord> = (0..base.batch_size).map(|j| &target[target_order[(k * base.batch_size + j) % target.len()]]).collect();
            let (sv, tv) = target_views(&tcases, cfg, epoch, k)?;
            if let Some(f) = hooks.on_batch.as_mut() {
                f(&event(&sv, &tcases, epoch, k, BatchRole::Student));
                f(&event(&tv, &tcases, epoch, k, BatchRole::Teacher));
            }
            let mut tdrop = stream(base.seed, Purpose::TargetDropout, epoch as u64, k as u64);
            let (cons, cgrads) = at_step(consistency_gradients(&student, &teacher, &sv.input, &tv.input, weight, &mut tdrop), epoch, k)?;
            let loss = sup + weight * cons;
            if !loss.is_finite() {
                return Err(CoreError::NonFiniteLoss { epoch, step: k });
            }
            for (name, g) in grads.iter_mut() {
                if let Some(c) = cgrads.get(name) {
                    g.add_assign(c);
                }
            }
            adam.step(&mut student.params, &grads, lr_at(step, total, base)?);
            ema_update(&mut teacher, &student, alpha)?;
            if let Some(f) = hooks.on_step.as_mut() {
                f(&student, &teacher);
            }
            sup_sum += sup;
            cons_sum += cons;
            total_sum += loss;
            step += 1;
        }
        let n = per_epoch as f64;
        let record = MtEpochRecord {
            epoch,
            mean_loss: total_sum / n,
            lr: lr0,
            consistency_weight_effective: weight,
            ema_decay: alpha,
            sup_loss: sup_sum / n,
            cons_loss: cons_sum / n,
        };
        if let Some(f) = hooks.on_epoch.as_mut() {
            f(&record, &student, &teacher)?;
        }
        log.epochs.push(record);
    }
    Ok(MtOutcome { student, teacher, log })
}
