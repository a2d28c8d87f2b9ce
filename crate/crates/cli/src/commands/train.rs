use std::path::{Path, PathBuf};

use strokeseg_core::adapt::{train_mt_with, MtHooks, MtLog};
use strokeseg_core::checkpoint::{save_checkpoint, Checkpoint};
use strokeseg_core::training::{train_with, TrainLog};
use strokeseg_core::CoreError;
use strokeseg_synth::{load_cases, Split};
use strokeseg_volume::CaseRecord;

use super::{create_dir, manifest_path, write_file};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::{AdaptArgs, TrainArgs};

pub const CHECKPOINT: &str = "model.ckpt";
pub const LAST: &str = "last.ckpt";
pub const LOG: &str = "train_log.csv";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

pub struct Options {
    pub config: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub split: Split,
}

impl From<&TrainArgs> for Options {
    fn from(a: &TrainArgs) -> Self {
        Self { config: a.config.clone(), data: a.data.clone(), out: a.out.clone(), seed: a.seed, split: a.split.into() }
    }
}

impl From<&AdaptArgs> for Options {
    fn from(a: &AdaptArgs) -> Self {
        Self::from(&a.train)
    }
}

fn load_split(data: &Path, split: Split) -> Result<Vec<CaseRecord>> {
    let path = manifest_path(data);
    let cases = load_cases(&path, Some(split))?;
    if cases.is_empty() {
        return Err(CliError::Invalid(format!("{} has no {} cases", path.display(), split.name())));
    }
    Ok(cases)
}

/// Loads the config with command-line overrides applied and writes its
/// snapshot next to the outputs.
fn prepare(opts: &Options, tweak: impl FnOnce(&mut RunConfig)) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.train.seed = seed;
    }
    tweak(&mut cfg);
    cfg.network.validate()?;
    create_dir(&opts.out)?;
    write_file(&opts.out.join(CONFIG_SNAPSHOT), cfg.to_toml())?;
    Ok(cfg)
}

fn save(ckpt: &Checkpoint, path: &Path) -> strokeseg_core::Result<()> {
    save_checkpoint(ckpt, path)
}

fn log_write(path: &Path, csv: String) -> strokeseg_core::Result<()> {
    std::fs::write(path, csv).map_err(|source| CoreError::Io { path: path.display().to_string(), source })
}

pub fn run_supervised(opts: &Options) -> Result<()> {
    let cfg = prepare(opts, |_| {})?;
    let cases = load_split(&opts.data, opts.split)?;
    let meta = cfg.to_toml();
    let mut log = TrainLog::default();
    let mut on_epoch = |r: &strokeseg_core::training::EpochRecord, w: &_| {
        log.epochs.push(r.clone());
        println!("epoch {} loss {:.6} lr {:.3e}", r.epoch, r.mean_loss, r.lr);
        save(&Checkpoint::single(w, meta.as_str()), &opts.out.join(LAST))?;
        log_write(&opts.out.join(LOG), log.to_csv())
    };
    let (weights, _) = train_with(&cases, &cfg.network, &cfg.train, &mut on_epoch)?;
    save(&Checkpoint::single(&weights, meta), &opts.out.join(CHECKPOINT))?;
    Ok(())
}

pub fn run_adapt(opts: &Options, target_data: &Path, target_split: Split, consistency_weight: Option<f64>) -> Result<()> {
    let cfg = prepare(opts, |c| {
        if let Some(w) = consistency_weight {
            c.mean_teacher.consistency_weight = w;
        }
    })?;
    let source = load_split(&opts.data, opts.split)?;
    let target: Vec<_> = load_split(target_data, target_split)?.into_iter().map(CaseRecord::without_label).collect();
    let meta = cfg.to_toml();
    let mut log = MtLog::default();
    let mut on_epoch = |r: &strokeseg_core::adapt::MtEpochRecord, s: &_, t: &_| {
        log.epochs.push(r.clone());
        println!("epoch {} loss {:.6} sup {:.6} cons {:.6} weight {:.4}", r.epoch, r.mean_loss, r.sup_loss, r.cons_loss, r.consistency_weight_effective);
        save(&Checkpoint::mean_teacher(s, t, meta.as_str()), &opts.out.join(LAST))?;
        log_write(&opts.out.join(LOG), log.to_csv())
    };
    let hooks = MtHooks { on_epoch: Some(&mut on_epoch), ..MtHooks::default() };
    let out = train_mt_with(&source, &target, &cfg.network, &cfg.mt_config(), hooks)?;
    save(&Checkpoint::mean_teacher(&out.student, &out.teacher, meta), &opts.out.join(CHECKPOINT))?;
    Ok(())
}
