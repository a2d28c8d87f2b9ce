//! `strokeseg`: synthetic data, preprocessing, training, inference and
//! evaluation behind one binary.

mod commands;
mod config;
mod error;
mod jobs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use strokeseg_synth::Split;

#[derive(Debug, Parser)]
#[command(name = "strokeseg", version, about = "Ischemic stroke lesion segmentation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic source/target/test dataset.
    Synth(SynthArgs),
    /// Skull-strip, register and normalise every case of a manifest.
    Preprocess(PreprocessArgs),
    /// Supervised training on the source split.
    Train(TrainArgs),
    /// Mean Teacher adaptation to an unlabelled target split.
    Adapt(AdaptArgs),
    /// Predict probability maps and masks with one model.
    Infer(InferArgs),
    /// Predict with the averaged probabilities of several models.
    EnsembleInfer(EnsembleInferArgs),
    /// Per-case metrics of one prediction directory.
    Evaluate(EvaluateArgs),
    /// Case-level ranking of several prediction directories.
    Rank(RankArgs),
    /// Smoothed voxel-wise false positive / false negative maps.
    Maps(MapsArgs),
    /// Built-in stand-in for the external preprocessing tools.
    #[command(hide = true)]
    AdapterStub {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Phantom specification (TOML); defaults to the desk-scale phantom.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Case counts: source,target-unlabelled,test.
    #[arg(long, value_parser = parse_sizes, default_value = "8,16,4")]
    sizes: [usize; 3],
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// Input manifest (or a directory holding manifest.json).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Reference DWI; without it a blank image on the first case's grid.
    #[arg(long, env = "STROKESEG_REFERENCE")]
    reference: Option<PathBuf>,
    /// Skull-stripping command, invoked as `<cmd> <in> <out>`.
    #[arg(long, env = "STROKESEG_SKULLSTRIP_TOOL")]
    skullstrip_tool: String,
    /// Registration command, invoked as `<cmd> <in> <out> <matrix>`.
    #[arg(long, env = "STROKESEG_REGISTER_TOOL")]
    register_tool: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Manifest with the labelled cases.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = SplitArg::Source)]
    split: SplitArg,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Manifest with the unlabelled target cases.
    #[arg(long)]
    target_data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::TargetUnlabeled)]
    target_split: SplitArg,
    /// Overrides `mean_teacher.consistency_weight`.
    #[arg(long)]
    consistency_weight: Option<f64>,
}

#[derive(Debug, Args)]
#[group(id = "model", required = true, multiple = false)]
struct ModelSource {
    #[arg(long, group = "model")]
    checkpoint: Option<PathBuf>,
    /// JSON list of checkpoint paths.
    #[arg(long, group = "model")]
    ensemble_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[command(flatten)]
    model: ModelSource,
    #[command(flatten)]
    common: InferCommon,
}

#[derive(Debug, Args)]
struct EnsembleInferArgs {
    /// JSON list of checkpoint paths, best first.
    #[arg(long)]
    ensemble_spec: PathBuf,
    /// Use only the first N listed models.
    #[arg(long)]
    top: Option<usize>,
    #[command(flatten)]
    common: InferCommon,
}

#[derive(Debug, Args)]
struct InferCommon {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Restrict to one split of the manifest.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Also write each mask mapped back to the case's native grid.
    #[arg(long)]
    native: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    /// Metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the prediction directory's name.
    #[arg(long)]
    model_id: Option<String>,
    /// Fill the stratum column from each ground-truth lesion volume.
    #[arg(long)]
    strata: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Prediction directories; each directory name is a model id.
    #[arg(long, num_args = 1.., required = true)]
    pred_dirs: Vec<PathBuf>,
    #[arg(long)]
    gt_dir: PathBuf,
    /// Ranking report.
    #[arg(long)]
    out: PathBuf,
    /// Also write the metrics of every model to this CSV.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    strata: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct MapsArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    /// Output directory for the four maps.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Source,
    TargetUnlabeled,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Source => Split::Source,
            SplitArg::TargetUnlabeled => Split::TargetUnlabeled,
            SplitArg::Test => Split::Test,
        }
    }
}

fn parse_sizes(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated counts, got {s:?}"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(out)
}

fn run(cli: Cli) -> error::Result<()> {
    use commands::*;
    match cli.command {
        Command::Synth(a) => synth::run(a.spec.as_deref(), &a.out, a.seed, a.sizes),
        Command::Preprocess(a) => preprocess::run(&preprocess::Options {
            input: a.input,
            out: a.out,
            reference: a.reference,
            skullstrip_tool: a.skullstrip_tool,
            register_tool: a.register_tool,
            jobs: a.jobs,
        }),
        Command::Train(a) => train::run_supervised(&train::Options::from(&a)),
        Command::Adapt(a) => train::run_adapt(&train::Options::from(&a.train), &a.target_data, a.target_split.into(), a.consistency_weight),
        Command::Infer(a) => {
            let models = match (a.model.checkpoint, a.model.ensemble_spec) {
                (Some(c), _) => infer::Models::Single(c),
                (None, Some(s)) => infer::Models::Ensemble { spec: s, top: None },
                (None, None) => unreachable!("clap enforces the group"),
            };
            infer::run(&models, &a.common.into())
        }
        Command::EnsembleInfer(a) => infer::run(&infer::Models::Ensemble { spec: a.ensemble_spec, top: a.top }, &a.common.into()),
        Command::Evaluate(a) => evaluate::run_evaluate(&a.pred_dir, &a.gt_dir, &a.out, a.model_id, a.strata, a.jobs),
        Command::Rank(a) => evaluate::run_rank(&a.pred_dirs, &a.gt_dir, &a.out, a.metrics_out.as_deref(), a.strata, a.jobs),
        Command::Maps(a) => evaluate::run_maps(&a.pred_dir, &a.gt_dir, &a.out),
        Command::AdapterStub { .. } => unreachable!("handled before dispatch"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::AdapterStub { args } = &cli.command {
        return ExitCode::from(strokeseg_preprocess::stub::main(args) as u8);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
