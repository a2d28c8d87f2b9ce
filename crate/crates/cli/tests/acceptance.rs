//! Acceptance suite. Criteria run one after another so that runtimes are
//! measured on an otherwise idle machine; each prints one PASS or FAIL line.
//!
//! `cargo test --test acceptance -- 3 7` runs a subset.

#[path = "../../evaluate/tests/common/oracle.rs"]
mod oracle;

mod common;

use std::borrow::Cow;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strokeseg_autograd::{Backend, ConvGeom, Dims, Eval, PoolKind, Tape, Tensor};
use strokeseg_core::adapt::{consistency_gradients, ema_update, rampup_weight, train_mt_with, BatchEvent, BatchRole, MtHooks};
use strokeseg_core::config::DS_WEIGHTS;
use strokeseg_core::ensemble::{ensemble_predict, Member};
use strokeseg_core::gradcheck::{check_network_gradients, relative_error, tiny_config};
use strokeseg_core::losses::{bce, ds_composite, gdl, gdl_bce, ufl, LossGrad, UflParams};
use strokeseg_core::network::forward_graph;
use strokeseg_core::training::{infer, stream, train, Purpose};
use strokeseg_core::{build_network, forward, AttentionKind, AugmentationSpec, BlockKind, LossConfig, MTConfig, Mode, NetworkConfig, NetworkWeights, TrainConfig};
use strokeseg_evaluate::maps::{raw_maps, FWHM_MM};
use strokeseg_evaluate::{case_level_ranking, dice, evaluate_case, fwhm_to_sigma, gaussian_smooth, ranking_report, voxelwise_maps, Metric, MetricOptions, MetricRecord};
use strokeseg_preprocess::normalize_zscore_clip;
use strokeseg_synth::{generate_split, PhantomSpec};
use strokeseg_volume::{BinaryMask, CaseRecord, Domain, Volume, VoxelGrid};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn s(e: impl Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_hd: f64 = 0.0;
    for k in 0..200 {
        let g = oracle::random_grid(&mut rng);
        let p = oracle::random_mask(&g, &mut rng);
        let t = oracle::random_mask(&g, &mut rng);
        let r = evaluate_case("c", "m", &p, &t, &MetricOptions::default()).map_err(s)?;
        ensure!(r.dsc == oracle::dice(&p, &t), "pair {k}: DSC {} vs {}", r.dsc, oracle::dice(&p, &t));
        ensure!(r.avd == oracle::avd(&p, &t), "pair {k}: AVD {} vs {}", r.avd, oracle::avd(&p, &t));
        ensure!(r.ald == oracle::ald(&p, &t), "pair {k}: ALD {} vs {}", r.ald, oracle::ald(&p, &t));
        ensure!(r.f1 == oracle::f1(&p, &t), "pair {k}: F1 {} vs {}", r.f1, oracle::f1(&p, &t));
        ensure!((r.precision, r.recall) == oracle::precision_recall(&p, &t), "pair {k}: precision/recall");
        let d = (r.hd95 - oracle::hd95(&p, &t)).abs();
        ensure!(d <= 1e-6, "pair {k}: HD95 off by {d:e} mm");
        worst_hd = worst_hd.max(d);
    }
    Ok(format!("200 pairs on 12^3 grids, counting metrics exact, worst HD95 error {worst_hd:.1e} mm (limit 1e-6)"))
}

// ---------------------------------------------------------------- 2

fn rec(case: &str, model: &str, v: [f64; 5]) -> MetricRecord {
    MetricRecord { case_id: case.into(), model_id: model.into(), dsc: v[0], avd: v[1], ald: v[2] as usize, f1: v[3], hd95: v[4], precision: 1.0, recall: 1.0 }
}

fn ranking() -> Outcome {
    let tie: Vec<_> = ["A", "B", "C"].iter().flat_map(|m| ["c1", "c2"].map(|c| rec(c, m, [0.7, 1.0, 1.0, 0.5, 4.0]))).collect();
    let t = case_level_ranking(&tie).map_err(s)?;
    ensure!(t.overall.values().all(|&r| r == 2.0), "full tie: {:?}", t.overall);

    let dominant = [
        rec("c1", "A", [0.9, 0.1, 0.0, 1.0, 1.0]),
        rec("c2", "A", [0.8, 0.2, 0.0, 0.9, 2.0]),
        rec("c1", "B", [0.5, 2.0, 3.0, 0.2, 9.0]),
        rec("c2", "B", [0.4, 3.0, 1.0, 0.3, 7.0]),
    ];
    let t = case_level_ranking(&dominant).map_err(s)?;
    ensure!(t.overall["A"] == 1.0 && t.overall["B"] == 2.0, "dominance: {:?}", t.overall);
    let mut chain = dominant.to_vec();
    chain.extend([rec("c1", "C", [0.1, 5.0, 4.0, 0.1, 20.0]), rec("c2", "C", [0.0, 6.0, 5.0, 0.0, 30.0])]);
    let t = case_level_ranking(&chain).map_err(s)?;
    ensure!((t.overall["A"], t.overall["B"], t.overall["C"]) == (1.0, 2.0, 3.0), "three-way dominance: {:?}", t.overall);

    // per-(case, metric) ranks worked out by hand, ties averaged
    let mixed = vec![
        rec("c1", "A", [0.8, 1.0, 0.0, 1.0, 2.0]),
        rec("c1", "B", [0.6, 1.0, 1.0, 0.5, 5.0]),
        rec("c1", "C", [0.7, 3.0, 0.0, 0.5, 1.0]),
        rec("c2", "A", [0.5, 2.0, 2.0, 0.4, 9.0]),
        rec("c2", "B", [0.9, 0.5, 0.0, 0.8, 3.0]),
        rec("c2", "C", [0.5, 2.5, 1.0, 0.8, 3.0]),
    ];
    let t = case_level_ranking(&mixed).map_err(s)?;
    let means = [("A", [1.75, 1.75, 2.25, 2.0, 2.5]), ("B", [2.0, 1.25, 2.0, 2.0, 2.25]), ("C", [2.25, 3.0, 1.75, 2.0, 1.25])];
    for (model, m) in means {
        for (metric, v) in Metric::ALL.into_iter().zip(m) {
            let got = t.metric_mean_ranks[&(model.to_string(), metric)];
            ensure!(got == v, "{model} {metric:?}: mean rank {got}, expected {v}");
        }
    }
    for (model, v) in [("A", 2.05), ("B", 1.9), ("C", 2.05)] {
        ensure!((t.overall[model] - v).abs() < 1e-12, "{model}: overall {} expected {v}", t.overall[model]);
    }
    ensure!(t.order() == ["B", "A", "C"], "order {:?}", t.order());

    let report = ranking_report(&mixed, &t);
    let row = report.lines().find(|l| l.starts_with("| A ")).ok_or("report has no row for A")?;
    let cells: Vec<&str> = row.split('|').map(str::trim).collect();
    // DSC median of (0.8, 0.5) with mean rank 1.75; ALD median of (0, 2)
    ensure!(cells[2] == "2.05" && cells[3] == "0.650 (1.75)" && cells[5] == "1.0 (2.25)", "report row {row:?}");
    Ok("full tie 2.00, dominance 1.00/2.00 and 1/2/3, hand-computed 3x2 table and report cells match".into())
}

// ---------------------------------------------------------------- 3

/// Evaluates like [`Eval`] while logging the shape of every produced value.
struct Recorder<'a> {
    inner: Eval<'a>,
    shapes: Vec<Dims>,
}

type R<'a> = strokeseg_autograd::Result<Cow<'a, Tensor>>;

impl<'a> Recorder<'a> {
    fn log(&mut self, t: Cow<'a, Tensor>) -> Cow<'a, Tensor> {
        self.shapes.push(t.dims());
        t
    }
}

impl<'a> Backend for Recorder<'a> {
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
        let y = self.inner.conv3d(x, w, b, g)?;
        Ok(self.log(y))
    }
    fn group_norm(&mut self, x: &Self::T, g: &Self::T, b: &Self::T, groups: usize) -> R<'a> {
        let y = self.inner.group_norm(x, g, b, groups)?;
        Ok(self.log(y))
    }
    fn leaky_relu(&mut self, x: &Self::T, slope: f64) -> Self::T {
        let y = self.inner.leaky_relu(x, slope);
        self.log(y)
    }
    fn sigmoid(&mut self, x: &Self::T) -> Self::T {
        let y = self.inner.sigmoid(x);
        self.log(y)
    }
    fn max_pool(&mut self, x: &Self::T, w: [usize; 3]) -> R<'a> {
        let y = self.inner.max_pool(x, w)?;
        Ok(self.log(y))
    }
    fn resize(&mut self, x: &Self::T, t: [usize; 3]) -> Self::T {
        let y = self.inner.resize(x, t);
        self.log(y)
    }
    fn concat(&mut self, parts: &[&Self::T]) -> R<'a> {
        let y = self.inner.concat(parts)?;
        Ok(self.log(y))
    }
    fn add(&mut self, a: &Self::T, b: &Self::T) -> R<'a> {
        let y = self.inner.add(a, b)?;
        Ok(self.log(y))
    }
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> R<'a> {
        let y = self.inner.mul(a, b)?;
        Ok(self.log(y))
    }
    fn global_pool(&mut self, x: &Self::T, k: PoolKind) -> Self::T {
        let y = self.inner.global_pool(x, k);
        self.log(y)
    }
    fn channel_pool(&mut self, x: &Self::T, k: PoolKind) -> Self::T {
        let y = self.inner.channel_pool(x, k);
        self.log(y)
    }
}

fn random_tensor(d: Dims, seed: u64, scale: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(d, (0..d.numel()).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn architecture_space() -> Outcome {
    let sp = [48, 56, 8];
    let x = random_tensor(Dims::new(2, 2, sp), 3, 2.0);
    let mut n = 0;
    for block in [BlockKind::StdUNet, BlockKind::ResUNet] {
        for att in AttentionKind::ALL {
            for ds in [false, true] {
                let cfg = NetworkConfig::desk(block, att, ds);
                let w = build_network(&cfg, 11).map_err(s)?;
                let out = forward(&w, &x, Mode::Eval).map_err(s)?;
                let heads = if ds { 6 } else { 1 };
                ensure!(out.outputs.len() == heads, "{block:?}/{att:?}/ds={ds}: {} heads", out.outputs.len());
                for o in &out.outputs {
                    ensure!(o.dims() == Dims::new(2, 1, sp), "{block:?}/{att:?}: output {:?}", o.dims());
                    ensure!(o.data().iter().all(|p| (0.0..=1.0).contains(p)), "{block:?}/{att:?}: probability out of range");
                }
                let mut rec = Recorder { inner: Eval::new(&w), shapes: Vec::new() };
                forward_graph(&mut rec, &cfg, x.clone(), None).map_err(s)?;
                let bad = rec.shapes.iter().find(|d| d.spatial() > 1 && d.sp[2] != sp[2]);
                ensure!(bad.is_none(), "{block:?}/{att:?}: IS extent changed to {bad:?}");
                // four in-plane halvings (rounding up) below the input
                ensure!(rec.shapes.iter().any(|d| d.sp == [3, 4, 8]), "{block:?}/{att:?}: no bottleneck at 3x4x8");
                n += 1;
            }
        }
    }
    Ok(format!("{n} configurations on 2x2x48x56x8, head counts 6/1, outputs in [0, 1], IS extent 8 at every level"))
}

// ---------------------------------------------------------------- 4

fn gradient_checks() -> Outcome {
    const PAPER: UflParams = UflParams { lambda: 0.5, delta: 0.6, gamma: 0.5 };
    type LossFn = Box<dyn Fn(&[f64], &[f64]) -> strokeseg_core::Result<LossGrad>>;
    let losses: Vec<(&str, LossFn)> = vec![
        ("GDL", Box::new(|p, y| gdl(p, y, 1e-5))),
        ("BCE", Box::new(bce)),
        ("GDL-BCE", Box::new(|p, y| gdl_bce(p, y, 1e-5))),
        ("UFL", Box::new(|p, y| ufl(p, y, PAPER))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (name, f) in &losses {
        for _ in 0..4 {
            let y: Vec<f64> = (0..64).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
            let p: Vec<f64> = (0..64).map(|_| rng.random_range(0.02..0.98)).collect();
            let g = f(&p, &y).map_err(s)?.grad;
            for i in 0..p.len() {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (f(&a, &y).map_err(s)?.value - f(&b, &y).map_err(s)?.value) / (2.0 * h);
                let rel = relative_error(g[i], fd, 1e-6);
                ensure!(rel <= 1e-3, "{name}[{i}]: analytic {} numeric {fd} (rel {rel:e})", g[i]);
                worst = worst.max(rel);
            }
        }
    }

    let mut summary = Vec::new();
    for (k, (block, att)) in [(BlockKind::StdUNet, AttentionKind::SeAGs), (BlockKind::ResUNet, AttentionKind::CBAM), (BlockKind::StdUNet, AttentionKind::AGh)].into_iter().enumerate() {
        let cfg = tiny_config(&NetworkConfig::desk(block, att, true));
        let seed = 20 + 10 * k as u64;
        let w = build_network(&cfg, seed).map_err(s)?;
        let sp = [16, 16, 4];
        let x = random_tensor(Dims::new(1, 2, sp), seed + 1, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let yd = Dims::new(1, 1, sp);
        let y = Tensor::new(yd, (0..yd.numel()).map(|_| f64::from(u8::from(rng.random_bool(0.2)))).collect()).unwrap();
        let report = check_network_gradients(&w, &x, &y, &LossConfig::default(), 1e-3, 1e-7, 1e-3).map_err(s)?;
        ensure!(report.passed(), "{block:?}+DS+{att:?}: {:?}", &report.failures[..report.failures.len().min(5)]);
        ensure!(report.checked + report.refined == w.param_count(), "{block:?}+DS+{att:?}: not every parameter compared");
        summary.push(format!("{block:?}+DS+{att:?} {} params ({} refined) worst {:.1e}", w.param_count(), report.refined, report.worst_relative_error));
    }
    Ok(format!("losses worst rel {worst:.1e}; width-2 networks: {} (limit 1e-3)", summary.join(", ")))
}

// ---------------------------------------------------------------- 5

fn ds_composite_weights() -> Outcome {
    ensure!(DS_WEIGHTS == [0.03, 0.045, 0.05, 0.125, 0.25, 0.5], "weights {DS_WEIGHTS:?}");
    for i in 0..6 {
        let mut e = [0.0; 6];
        e[i] = 1.0;
        let v = ds_composite(&e, &DS_WEIGHTS).map_err(s)?;
        ensure!(v == DS_WEIGHTS[i], "unit vector {i}: {v} != {}", DS_WEIGHTS[i]);
    }
    let sum: f64 = DS_WEIGHTS.iter().sum();
    ensure!((sum - 1.0).abs() <= 1e-9, "weights sum to {sum}");
    let all = ds_composite(&[1.0; 6], &DS_WEIGHTS).map_err(s)?;
    ensure!((all - 1.0).abs() <= 1e-9, "composite of ones {all}");
    Ok(format!("unit inputs return each weight exactly, sum {sum}"))
}

// ---------------------------------------------------------------- 6

fn zscored(case: CaseRecord) -> CaseRecord {
    let head = BinaryMask::from_volume(&case.dwi, |v| v > 0.1);
    let dwi = normalize_zscore_clip(&case.dwi, &head).unwrap();
    let adc = normalize_zscore_clip(&case.adc, &head).unwrap();
    CaseRecord { dwi, adc, ..case }
}

fn synthetic(n_source: usize, n_test: usize, seed: u64) -> Result<(Vec<CaseRecord>, Vec<CaseRecord>), String> {
    let data = generate_split(&PhantomSpec::default(), n_source, 0, n_test, seed).map_err(s)?;
    Ok((data.source.into_iter().map(zscored).collect(), data.test.into_iter().map(zscored).collect()))
}

fn isla_b() -> NetworkConfig {
    NetworkConfig::desk(BlockKind::StdUNet, AttentionKind::SeAGs, true)
}

fn mean_dsc(w: &NetworkWeights, cases: &[CaseRecord]) -> Result<f64, String> {
    let mut sum = 0.0;
    for c in cases {
        let (_, m) = infer(w, c, c.grid()).map_err(s)?;
        sum += dice(&m, c.label.as_ref().unwrap()).map_err(s)?;
    }
    Ok(sum / cases.len() as f64)
}

/// A few hundred steps is short for the default 5e-4 schedule, so start higher.
fn short_run() -> TrainConfig {
    TrainConfig { lr_start: 1e-2, lr_end: 1e-4, ..TrainConfig::default() }
}

fn overfit() -> Outcome {
    let (cases, _) = synthetic(4, 0, 6)?;
    let cfg = TrainConfig { epochs: 200, batch_size: 4, seed: 1, augmentation: AugmentationSpec::identity(), ..short_run() };
    let (w, log) = train(&cases, &isla_b(), &cfg).map_err(s)?;
    let d = mean_dsc(&w, &cases)?;
    let (first, last) = (log.epochs[0].mean_loss, log.epochs.last().unwrap().mean_loss);
    ensure!(d >= 0.90, "training DSC {d:.4} < 0.90 (loss {first:.4} -> {last:.4})");
    Ok(format!("200 steps on 4 synthetic 48x56x8 cases, training DSC {d:.4} (>= 0.90), loss {first:.4} -> {last:.4}"))
}

// ---------------------------------------------------------------- 7

fn blob_case(id: &str, seed: u64, domain: Domain) -> CaseRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = VoxelGrid::las([16, 16, 4], [3.6, 3.6, 24.0]).unwrap();
    let c = [rng.random_range(5.0..11.0), rng.random_range(5.0..11.0), rng.random_range(1.0..3.0)];
    let r = [rng.random_range(2.0..3.5), rng.random_range(2.0..3.5), 1.2];
    let inside = |p: [usize; 3]| (0..3).map(|a| ((p[a] as f64 - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0;
    let dwi = Volume::from_fn(g.clone(), |p| if inside(p) { 2.0 } else { 0.0 } + rng.random_range(-0.3..0.3)).unwrap();
    let adc = Volume::from_fn(g.clone(), |p| if inside(p) { -1.5 } else { 0.5 } + rng.random_range(-0.3..0.3)).unwrap();
    let label = (domain == Domain::Source).then(|| BinaryMask::from_fn(g, inside));
    CaseRecord::new(id, dwi, adc, label, domain).unwrap()
}

fn blob_set(prefix: &str, n: usize, seed: u64, domain: Domain) -> Vec<CaseRecord> {
    (0..n).map(|i| blob_case(&format!("{prefix}{i}"), seed + i as u64, domain)).collect()
}

fn distance(a: &NetworkWeights, b: &NetworkWeights) -> f64 {
    a.params.values().zip(b.params.values()).flat_map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| (p - q).powi(2))).sum::<f64>().sqrt()
}

fn mt(epochs: usize, gamma: f64, alpha: f64) -> MTConfig {
    MTConfig {
        consistency_weight: gamma,
        rampup_epochs: 1,
        ema_decay_rampup: alpha,
        ema_decay_final: alpha,
        base: TrainConfig { epochs, batch_size: 2, seed: 5, augmentation: AugmentationSpec::scaled(4.0), ..TrainConfig::default() },
    }
}

fn mean_teacher() -> Outcome {
    let net = isla_b();
    // fixed point
    let student = build_network(&net, 1).map_err(s)?;
    let mut t = student.clone();
    ema_update(&mut t, &student, 0.99).map_err(s)?;
    ensure!(t.params == student.params, "EMA of identical weights moved");

    // geometric convergence towards a frozen student
    let teacher0 = build_network(&net, 2).map_err(s)?;
    let d0 = distance(&teacher0, &student);
    let mut worst: f64 = 0.0;
    for (alpha, steps) in [(0.99, 200), (0.9, 50)] {
        let mut t = teacher0.clone();
        for k in 1..=steps {
            ema_update(&mut t, &student, alpha).map_err(s)?;
            let err = (distance(&t, &student) - alpha.powi(k) * d0).abs();
            ensure!(err <= 1e-9, "alpha {alpha} step {k}: off by {err:e}");
            worst = worst.max(err);
        }
    }

    // gamma = 0 and alpha = 0 reduce to supervised training
    let source = blob_set("s", 3, 40, Domain::Source);
    let target = blob_set("t", 3, 1040, Domain::Target);
    let cfg = mt(2, 0.0, 0.0);
    let out = train_mt_with(&source, &target, &net, &cfg, MtHooks::default()).map_err(s)?;
    let (plain, _) = train(&source, &net, &cfg.base).map_err(s)?;
    let gap = out.teacher.params.iter().flat_map(|(k, t)| t.data().iter().zip(plain.params[k].data()).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
    ensure!(gap <= 1e-7, "degenerate run differs from plain training by {gap:e}");

    // batch roles, domains and augmentation sharing
    let mut events = Vec::<BatchEvent>::new();
    let mut on_batch = |e: &BatchEvent| events.push(e.clone());
    let hooks = MtHooks { on_batch: Some(&mut on_batch), ..MtHooks::default() };
    let source = blob_set("s", 2, 50, Domain::Source);
    let target = blob_set("t", 3, 1050, Domain::Target);
    train_mt_with(&source, &target, &net, &mt(2, 5.0, 0.99), hooks).map_err(s)?;
    ensure!(!events.is_empty() && events.len().is_multiple_of(3), "{} batch events", events.len());
    for e in &events {
        let want = if e.role == BatchRole::Supervised { Domain::Source } else { Domain::Target };
        ensure!(e.domains.iter().all(|d| *d == want), "{:?} batch saw {:?}", e.role, e.domains);
    }
    for triple in events.chunks(3) {
        let (st, te) = (&triple[1], &triple[2]);
        ensure!((st.role, te.role) == (BatchRole::Student, BatchRole::Teacher), "unexpected roles");
        ensure!(st.case_ids == te.case_ids && st.spatial == te.spatial, "student and teacher views differ spatially");
        ensure!(st.intensity.iter().zip(&te.intensity).all(|(a, b)| a != b), "intensity draws shared");
    }

    // the teacher's output enters the consistency gradient as a constant
    let teacher = build_network(&net, 2).map_err(s)?;
    let d = Dims::new(1, 2, [16, 16, 4]);
    let (xs, xt) = (random_tensor(d, 3, 1.0), random_tensor(d, 4, 1.0));
    let (_, grads) = consistency_gradients(&student, &teacher, &xs, &xt, 3.0, &mut stream(0, Purpose::TargetDropout, 0, 0)).map_err(s)?;
    let frozen = forward(&teacher, &xt, Mode::Eval).map_err(s)?.prediction().clone();
    let mut tape = Tape::new(&student);
    let f = forward_graph(&mut tape, &student.config, xs, Some(&mut stream(0, Purpose::TargetDropout, 0, 0))).map_err(s)?;
    let last = *f.heads.last().unwrap();
    let p = tape.value(&last).clone();
    let n = p.numel() as f64;
    let seed: Vec<f64> = p.data().iter().zip(frozen.data()).map(|(a, b)| 3.0 * 2.0 * (a - b) / n).collect();
    let reference = tape.backward(vec![(last, Tensor::new(p.dims(), seed).unwrap())]).map_err(s)?;
    ensure!(grads.keys().eq(student.params.keys()), "gradient keys differ from student parameters");
    ensure!(grads.iter().all(|(k, g)| *g == reference[k]), "consistency gradient depends on the teacher");

    let def = MTConfig::default();
    let (r0, r60) = (rampup_weight(0, &def), rampup_weight(60, &def));
    ensure!(r0 == 5.0 * (-5.0f64).exp() && r60 == 5.0, "ramp-up endpoints {r0} and {r60}");
    Ok(format!("fixed point, geometric decay (worst {worst:.1e}), degenerate gap {gap:.1e}, {} tagged batches, stop-gradient exact, ramp-up {r0:.6}/{r60}", events.len()))
}

// ---------------------------------------------------------------- 8

fn ensembles() -> Outcome {
    let (source, test) = synthetic(8, 6, 31)?;
    let cfg = |seed| TrainConfig { epochs: 60, batch_size: 4, seed, augmentation: AugmentationSpec::scaled(4.0), ..short_run() };
    let (a, _) = train(&source, &isla_b(), &cfg(1)).map_err(s)?;
    let (b, _) = train(&source, &isla_b(), &cfg(2)).map_err(s)?;
    let case = &test[0];
    let grid = case.grid();

    let single = ensemble_predict(&[Member { id: "a", weights: &a }], case, grid).map_err(s)?;
    ensure!(single == infer(&a, case, grid).map_err(s)?, "single-member ensemble differs from the model");
    let copies: Vec<Member> = (0..3).map(|_| Member { id: "a", weights: &a }).collect();
    ensure!(ensemble_predict(&copies, case, grid).map_err(s)? == single, "duplicate members changed the prediction");
    let ab = ensemble_predict(&[Member { id: "a", weights: &a }, Member { id: "b", weights: &b }], case, grid).map_err(s)?;
    let ba = ensemble_predict(&[Member { id: "b", weights: &b }, Member { id: "a", weights: &a }], case, grid).map_err(s)?;
    ensure!(ab == ba, "member order changed the prediction");

    let (da, db) = (mean_dsc(&a, &test)?, mean_dsc(&b, &test)?);
    let mut sum = 0.0;
    for c in &test {
        let (_, m) = ensemble_predict(&[Member { id: "a", weights: &a }, Member { id: "b", weights: &b }], c, c.grid()).map_err(s)?;
        sum += dice(&m, c.label.as_ref().unwrap()).map_err(s)?;
    }
    let de = sum / test.len() as f64;
    ensure!(de >= da.max(db) - 0.02, "Ensemble-2 DSC {de:.4} < max({da:.4}, {db:.4}) - 0.02");
    Ok(format!("identity, idempotence and order invariance bitwise; held-out DSC models {da:.4}/{db:.4}, Ensemble-2 {de:.4}"))
}

// ---------------------------------------------------------------- 9

fn maps() -> Outcome {
    let g = VoxelGrid::las([20, 18, 6], [1.0, 1.5, 4.0]).map_err(s)?;
    let gt = BinaryMask::from_fn(g.clone(), |p| (5..9).contains(&p[0]) && (4..8).contains(&p[1]) && (1..3).contains(&p[2]));
    let gt2 = BinaryMask::from_fn(g.clone(), |p| (12..15).contains(&p[0]) && (9..14).contains(&p[1]) && p[2] == 3);
    let zero = voxelwise_maps(&[(gt.clone(), gt.clone()), (gt2.clone(), gt2.clone())]).map_err(s)?;
    ensure!(zero.iter().all(|(_, v)| v.data().iter().all(|&x| x == 0.0)), "pred = gt gave non-zero maps");

    let fp = [15, 14, 4];
    let fi = g.index(fp[0], fp[1], fp[2]);
    let pred = BinaryMask::from_fn(g.clone(), |p| gt.at(p[0], p[1], p[2]) || p == fp);
    let raw = raw_maps(&[(pred, gt.clone())]).map_err(s)?;
    let sp = g.spacing();
    let expected = oracle::voxels(&gt)
        .iter()
        .map(|q| (0..3).map(|k| ((fp[k] as f64 - q[k] as f64) * sp[k]).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    let got = raw.fp_mean_hd.data()[fi];
    ensure!((got - expected).abs() <= 1e-12, "FP distance {got} vs {expected}");
    ensure!(raw.fp_proportion.data()[fi] == 1.0, "FP proportion {}", raw.fp_proportion.data()[fi]);
    let stray = raw.fp_mean_hd.data().iter().enumerate().any(|(i, &v)| i != fi && v != 0.0);
    ensure!(!stray, "FP distance outside the FP voxel");
    ensure!(raw.fn_proportion.data().iter().all(|&v| v == 0.0), "FN map non-zero");

    let sigma = fwhm_to_sigma(FWHM_MM);
    let want = 4.0 / (2.0 * (2.0 * 2f64.ln()).sqrt());
    ensure!((sigma - want).abs() <= 1e-6, "sigma {sigma} vs {want}");
    // the smoothing kernel decays as exp(-d^2 / 2 sigma^2) along a 1 mm axis
    let iso = VoxelGrid::las([21, 1, 1], [1.0; 3]).map_err(s)?;
    let impulse = Volume::from_fn(iso, |p| f64::from(u8::from(p[0] == 10))).map_err(s)?;
    let sm = gaussian_smooth(&impulse, sigma).map_err(s)?;
    for d in 1..=3usize {
        let ratio = sm.data()[10 + d] / sm.data()[10];
        let g = (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
        ensure!((ratio - g).abs() <= 1e-12, "kernel ratio at {d} mm: {ratio} vs {g}");
    }
    Ok(format!("zero maps for pred = gt, FP distance {got:.6} mm exact, sigma {sigma:.9} mm"))
}

// ---------------------------------------------------------------- 10

fn pipeline_run(dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    use common::{stub, strokeseg, TINY_CONFIG};
    std::fs::write(dir.join("cfg.toml"), TINY_CONFIG).map_err(s)?;
    let (strip, register) = (stub("threshold 0.1"), stub("grid-search 1"));
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth", "--sizes", "4,4,3", "--seed", "17", "--out", "data"],
        vec!["preprocess", "--in", "data", "--out", "pre", "--skullstrip-tool", &strip, "--register-tool", &register, "--jobs", "2"],
        vec!["train", "--config", "cfg.toml", "--data", "pre", "--out", "sup", "--seed", "17"],
        vec!["adapt", "--config", "cfg.toml", "--data", "pre", "--target-data", "pre", "--out", "mt", "--seed", "17"],
        vec!["infer", "--checkpoint", "sup/model.ckpt", "--data", "pre", "--split", "test", "--out", "pred/supervised", "--jobs", "2"],
        vec!["infer", "--checkpoint", "mt/model.ckpt", "--data", "pre", "--split", "test", "--out", "pred/mean_teacher"],
        vec!["evaluate", "--pred-dir", "pred/supervised", "--gt-dir", "pre/cases", "--out", "metrics.csv", "--strata"],
        vec!["rank", "--pred-dirs", "pred/supervised", "pred/mean_teacher", "--gt-dir", "pre/cases", "--out", "ranking.md"],
    ];
    for args in steps {
        let out = strokeseg(dir, &args);
        ensure!(out.status.success(), "{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr));
    }
    Ok((std::fs::read(dir.join("metrics.csv")).map_err(s)?, std::fs::read(dir.join("ranking.md")).map_err(s)?))
}

fn pipeline_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(s)?, tempfile::tempdir().map_err(s)?);
    let first = pipeline_run(a.path())?;
    let second = pipeline_run(b.path())?;
    ensure!(first.0 == second.0, "metrics CSV differs between runs");
    ensure!(first.1 == second.1, "ranking report differs between runs");
    let rows = String::from_utf8_lossy(&first.0).lines().count() - 1;
    ensure!(rows == 3, "{rows} metric rows, expected 3 test cases");
    Ok(format!("two runs byte-identical ({} B metrics CSV, {} B ranking report)", first.0.len(), first.1.len()))
}

// ----------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

const fn minutes(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "metric oracle suite", limit: Some(Duration::from_secs(30)), run: metric_oracles },
    Criterion { id: 2, name: "case-level ranking", limit: None, run: ranking },
    Criterion { id: 3, name: "architecture space", limit: minutes(2), run: architecture_space },
    Criterion { id: 4, name: "gradient checks", limit: minutes(5), run: gradient_checks },
    Criterion { id: 5, name: "deep supervision composite", limit: None, run: ds_composite_weights },
    Criterion { id: 6, name: "overfit sanity", limit: minutes(10), run: overfit },
    Criterion { id: 7, name: "Mean Teacher contracts", limit: None, run: mean_teacher },
    Criterion { id: 8, name: "ensemble contracts", limit: None, run: ensembles },
    Criterion { id: 9, name: "voxel-wise maps", limit: None, run: maps },
    Criterion { id: 10, name: "end-to-end determinism", limit: minutes(15), run: pipeline_determinism },
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|m| m.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {:.1} s, limit {} s", took.as_secs_f64(), limit.as_secs())),
            (r, _) => r,
        };
        let budget = c.limit.map(|l| format!(" < {} s", l.as_secs())).unwrap_or_default();
        match result {
            Ok(detail) => println!("PASS  {:>2}. {} ({:.1} s{budget}): {detail}", c.id, c.name, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}. {} ({:.1} s{budget}): {why}", c.id, c.name, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
