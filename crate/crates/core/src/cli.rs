//! Command-line front end: `hgmodes <gen|holo|train|eval|search|report>`.
//!
//! Every subcommand accepts `--config <file.json>` whose keys are the long
//! flag names with underscores. Flags given on the command line win over the
//! file. The resolved configuration is written to `config.json` in the
//! output directory.

use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::holo::{self, OpticalTrainConfig, PexpConfig};
use crate::nn::{Checkpoint, MicroResNetConfig, OptimizerKind};
use crate::physics::ModePair;
use crate::pipeline::search::{self, SearchSpace};
use crate::pipeline::{self, AugmentConfig, EvalFit, LabeledSet, TrainConfig};
use crate::report;
use crate::simgen::{self, GenConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => e.exit_code(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hgmodes", version, about = "Hermite-Gaussian mode datasets, holograms and classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the simulated train/val dataset.
    Gen(GenArgs),
    /// Generate the pseudo-experimental set through the simulated hologram optics.
    Holo(HoloArgs),
    /// Train a classifier from scratch.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Random hyperparameter search.
    Search(SearchArgs),
    /// Plot accuracy curves and tabulate runs found under a directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 224 px, 300/200 per class, 50 trials x 30 epochs.
    Paper,
    /// 64 px, 100/50 per class, 8 trials x 12 epochs.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitArg {
    Auto,
    Crop,
    Resize,
}

impl From<FitArg> for EvalFit {
    fn from(f: FitArg) -> Self {
        match f {
            FitArg::Auto => EvalFit::Auto,
            FitArg::Crop => EvalFit::Crop,
            FitArg::Resize => EvalFit::Resize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub per_class_train: Option<usize>,
    #[arg(long)]
    pub per_class_val: Option<usize>,
    /// Output resolution; the sensor side is kept.
    #[arg(long)]
    pub px: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(skip)]
    pub classes: Option<Vec<ModePair>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoloArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Images per class (default 118).
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Camera resolution (default 256).
    #[arg(long)]
    pub px: Option<usize>,
    /// Horizontal grating frequency in cycles per hologram pixel (default 0.25).
    #[arg(long)]
    pub carrier: Option<f64>,
    /// Vertical grating frequency in cycles per hologram pixel (default 0).
    #[arg(long)]
    pub carrier_y: Option<f64>,
    /// Also export one phase-map PNG per class with the grating frequency
    /// reduced by this fraction, for display.
    #[arg(long)]
    pub viz_grating_decimation: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(skip)]
    pub optics: Option<OpticalTrainConfig>,
    #[arg(skip)]
    pub classes: Option<Vec<ModePair>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Training manifest (file or directory).
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Optional pseudo-experimental set used to pick the best epoch.
    #[arg(long)]
    pub pexp: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub step_size: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub eval_fit: Option<FitArg>,
    #[arg(skip)]
    pub model: Option<MicroResNetConfig>,
    #[arg(skip)]
    pub augment: Option<AugmentConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Manifest (file or directory) to evaluate on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Where to write `evaluation.json`, `confusion.csv` and `predictions.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub eval_fit: Option<FitArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub pexp: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Number of trials (desk 8, paper 50).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Epochs per trial (desk 12, paper 30).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub step_size: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub eval_fit: Option<FitArg>,
    #[arg(skip)]
    pub space: Option<SearchSpace>,
    #[arg(skip)]
    pub model: Option<MicroResNetConfig>,
    #[arg(skip)]
    pub augment: Option<AugmentConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory searched recursively for `metrics.csv` files.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// Output directory (defaults to the runs directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlays the flags that were given onto the config file's keys.
fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("args serialize"))
            .expect("args round trip"));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut merged: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Value::Object(base) = &mut merged else {
        return Err(CliError::Usage(format!("{}: expected a JSON object", path.display())));
    };
    if let Value::Object(over) = serde_json::to_value(flags).expect("args serialize") {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    value.as_ref().ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn existing<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    let p = required(value, flag)?;
    if !p.exists() {
        return Err(CliError::Usage(format!("--{flag}: {} does not exist", p.display())));
    }
    Ok(p)
}

#[derive(Serialize)]
struct Echo<'a, A: Serialize, C: Serialize> {
    command: &'a str,
    args: &'a A,
    effective: &'a C,
}

fn echo_config<A: Serialize, C: Serialize>(dir: &Path, command: &str, args: &A, effective: &C) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.json");
    let mut text = serde_json::to_string_pretty(&Echo {
        command,
        args,
        effective,
    })
    .expect("config serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn gen_config(a: &GenArgs) -> GenConfig {
    let mut cfg = match a.preset.unwrap_or(Preset::Desk) {
        Preset::Paper => GenConfig::paper(),
        Preset::Desk => GenConfig::desk(),
    };
    if let Some(px) = a.px {
        cfg = cfg.with_resolution(px);
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.train_per_class = a.per_class_train.unwrap_or(cfg.train_per_class);
    cfg.val_per_class = a.per_class_val.unwrap_or(cfg.val_per_class);
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    cfg.noise_scale = a.noise_scale.unwrap_or(cfg.noise_scale);
    if let Some(c) = &a.classes {
        cfg.classes = c.clone();
    }
    cfg
}

fn cmd_gen(flags: &GenArgs) -> CliResult<()> {
    let a = resolve(flags, flags.config.as_deref())?;
    let out = required(&a.out, "out")?;
    let cfg = gen_config(&a);
    cfg.validate()?;
    echo_config(out, "gen", &a, &cfg)?;
    let ds = simgen::generate_dataset(&cfg, out)?;
    println!(
        "wrote {} train and {} val images ({} px) to {}",
        ds.train.records.len(),
        ds.val.records.len(),
        cfg.geom.n_px,
        out.display()
    );
    Ok(())
}

fn holo_config(a: &HoloArgs) -> PexpConfig {
    let mut cfg = PexpConfig::default();
    if let Some(o) = &a.optics {
        cfg.optics = o.clone();
    }
    cfg.optics.out_px = a.px.unwrap_or(cfg.optics.out_px);
    cfg.optics.carrier.0 = a.carrier.unwrap_or(cfg.optics.carrier.0);
    cfg.optics.carrier.1 = a.carrier_y.unwrap_or(cfg.optics.carrier.1);
    cfg.per_class = a.per_class.unwrap_or(cfg.per_class);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.noise_scale = a.noise_scale.unwrap_or(cfg.noise_scale);
    if let Some(c) = &a.classes {
        cfg.classes = c.clone();
    }
    cfg
}

fn cmd_holo(flags: &HoloArgs) -> CliResult<()> {
    let a = resolve(flags, flags.config.as_deref())?;
    let out = required(&a.out, "out")?;
    let cfg = holo_config(&a);
    if let Some(d) = a.viz_grating_decimation {
        if !(0.0..1.0).contains(&d) {
            return Err(CliError::Usage(format!("--viz-grating-decimation must lie in [0, 1), got {d}")));
        }
    }
    cfg.validate()?;
    echo_config(out, "holo", &a, &cfg)?;
    let manifest = holo::gen_pseudo_experimental(&cfg, out)?;
    if let Some(d) = a.viz_grating_decimation {
        let dir = out.join("holograms");
        for r in manifest.records.iter().filter(|r| r.path.ends_with("/0000.png")) {
            let spec = simgen::SampleParams::from_record(r).spec;
            let h = holo::visualization_hologram(&spec, &cfg.optics, d)?;
            let m = r.mode();
            crate::imageio::write_png(&dir.join(format!("hg{}{}.png", m.n, m.m)), &h.to_png_image())?;
        }
    }
    println!(
        "wrote {} pseudo-experimental images ({} px) to {}",
        manifest.records.len(),
        cfg.optics.out_px,
        out.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    if a.preset == Some(Preset::Paper) {
        cfg.model.input_px = 224;
        cfg.hyperparams.epochs = 30;
    }
    if let Some(m) = &a.model {
        cfg.model = m.clone();
    }
    if let Some(aug) = &a.augment {
        cfg.augment = aug.clone();
    }
    let hp = &mut cfg.hyperparams;
    hp.lr0 = a.lr.unwrap_or(hp.lr0);
    hp.momentum = a.momentum.unwrap_or(hp.momentum);
    hp.batch_size = a.batch_size.unwrap_or(hp.batch_size);
    hp.epochs = a.epochs.unwrap_or(hp.epochs);
    hp.step_size = a.step_size.unwrap_or(hp.step_size);
    hp.gamma = a.gamma.unwrap_or(hp.gamma);
    hp.optimizer = a.optimizer.map(Into::into).unwrap_or(hp.optimizer);
    hp.seed = a.seed.unwrap_or(hp.seed);
    cfg.eval_fit = a.eval_fit.map(Into::into).unwrap_or(cfg.eval_fit);
    cfg
}

type Splits = (LabeledSet, LabeledSet, Option<LabeledSet>);

fn load_splits(train: &Path, val: &Path, pexp: Option<&Path>) -> CliResult<Splits> {
    let train = LabeledSet::load(train, None)?;
    let val = LabeledSet::load(val, Some(&train.classes))?;
    let pexp = pexp.map(|p| LabeledSet::load(p, Some(&train.classes))).transpose()?;
    Ok((train, val, pexp))
}

fn optional_existing<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<Option<&'a Path>> {
    match value {
        Some(_) => existing(value, flag).map(Some),
        None => Ok(None),
    }
}

fn cmd_train(flags: &TrainArgs) -> CliResult<()> {
    let a = resolve(flags, flags.config.as_deref())?;
    let (train_p, val_p) = (existing(&a.train, "train")?, existing(&a.val, "val")?);
    let pexp_p = optional_existing(&a.pexp, "pexp")?;
    let out = required(&a.out, "out")?;
    let cfg = train_config(&a);
    cfg.hyperparams.validate()?;
    cfg.model.validate()?;
    echo_config(out, "train", &a, &cfg)?;
    let (train, val, pexp) = load_splits(train_p, val_p, pexp_p)?;
    let r = pipeline::train(&cfg, &train, &val, pexp.as_ref(), Some(out))?;
    let exp = r.best_exp_acc.map(|v| format!("{:.4}", v)).unwrap_or_else(|| "n/a".into());
    println!(
        "best epoch {}: pexp acc {exp}, val acc {:.4} ({:.1} s)",
        r.best_epoch, r.corr_val_acc, r.timing.total_seconds
    );
    Ok(())
}

fn cmd_eval(flags: &EvalArgs) -> CliResult<()> {
    let a = resolve(flags, flags.config.as_deref())?;
    let ckpt = Checkpoint::load(existing(&a.checkpoint, "checkpoint")?)?;
    let data = existing(&a.data, "data")?;
    let fit: EvalFit = a.eval_fit.map(Into::into).unwrap_or(EvalFit::Auto);
    let ev = pipeline::evaluate(&ckpt, data, fit)?;
    if let Some(out) = &a.out {
        echo_config(out, "eval", &a, &fit)?;
        let write = |name: &str, text: String| -> CliResult<()> {
            let p = out.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            Ok(())
        };
        write("evaluation.json", serde_json::to_string_pretty(&ev).expect("evaluation serializes") + "\n")?;
        write("confusion.csv", ev.confusion.to_csv())?;
        let mut preds = String::from("path,truth,predicted\n");
        for p in &ev.predictions {
            preds.push_str(&format!("{},{},{}\n", p.path, p.truth, p.predicted));
        }
        write("predictions.csv", preds)?;
    }
    println!("accuracy {:.4} on {} images", ev.accuracy, ev.predictions.len());
    Ok(())
}

fn cmd_search(flags: &SearchArgs) -> CliResult<()> {
    let a = resolve(flags, flags.config.as_deref())?;
    let (train_p, val_p) = (existing(&a.train, "train")?, existing(&a.val, "val")?);
    let pexp_p = optional_existing(&a.pexp, "pexp")?;
    let out = required(&a.out, "out")?;
    let paper = a.preset == Some(Preset::Paper);
    let trials = a.trials.unwrap_or(if paper { 50 } else { 8 });
    let epochs = a.epochs.unwrap_or(if paper { 30 } else { 12 });
    let seed = a.seed.unwrap_or(0);
    let mut space = a.space.clone().unwrap_or_default();
    space.step_size = a.step_size.unwrap_or(space.step_size);
    space.gamma = a.gamma.unwrap_or(space.gamma);
    let mut base = TrainConfig::default();
    if paper {
        base.model.input_px = 224;
    }
    if let Some(m) = &a.model {
        base.model = m.clone();
    }
    if let Some(aug) = &a.augment {
        base.augment = aug.clone();
    }
    base.eval_fit = a.eval_fit.map(Into::into).unwrap_or(base.eval_fit);

    #[derive(Serialize)]
    struct Effective<'a> {
        trials: usize,
        epochs: usize,
        seed: u64,
        space: &'a SearchSpace,
        base: &'a TrainConfig,
    }
    echo_config(
        out,
        "search",
        &a,
        &Effective {
            trials,
            epochs,
            seed,
            space: &space,
            base: &base,
        },
    )?;
    let (train, val, pexp) = load_splits(train_p, val_p, pexp_p)?;
    let results = search::random_search(&base, &space, trials, epochs, seed, (&train, &val, pexp.as_ref()), Some(out))?;
    if let Some(best) = results.first() {
        println!(
            "best trial {}: lr {:.6}, momentum {:.6}, batch {} -> pexp {:?}, val {:?}",
            best.trial,
            best.hyperparams.lr0,
            best.hyperparams.momentum,
            best.hyperparams.batch_size,
            best.best_exp_acc,
            best.corr_val_acc
        );
    }
    Ok(())
}

fn cmd_report(flags: &ReportArgs) -> CliResult<()> {
    let a = resolve(flags, flags.config.as_deref())?;
    let runs_dir = existing(&a.runs, "runs")?;
    let runs = report::collect_runs(runs_dir)?;
    if runs.is_empty() {
        return Err(CliError::Usage(format!("no runs found under {}", runs_dir.display())));
    }
    let out = a.out.as_deref().unwrap_or(runs_dir);
    let written = report::write_report(&runs, out)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Holo(a) => cmd_holo(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Search(a) => cmd_search(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            let text = e.to_string();
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
