//! Dataset loading, the training and evaluation loops, and metrics.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{self, GrayImage};
use crate::manifest::{DatasetManifest, PixelStats};
use crate::nn::{
    self, step_scheduler, Adam, Checkpoint, MicroResNet, MicroResNetConfig, Mode, Module, Optimizer, OptimizerKind,
    Sgd, Tensor,
};
use crate::physics::{ModePair, SensorGeometry};
use crate::seed;

pub mod augment;
pub mod oracle;
pub mod search;

pub use augment::{AugmentConfig, EvalFit, Frame};

/// Images of one split with labels indexed into `classes`.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub split: String,
    pub classes: Vec<ModePair>,
    pub geometry: SensorGeometry,
    pub stats: Option<PixelStats>,
    pub paths: Vec<String>,
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    /// Loads a manifest (file or directory) and its PNGs. With `classes`
    /// given, labels index into that list and every record must belong to it.
    pub fn load(path: &Path, classes: Option<&[ModePair]>) -> Result<Self> {
        let (manifest, root) = DatasetManifest::load(path)?;
        let classes: Vec<ModePair> = match classes {
            Some(c) => c.iter().map(|m| m.canonical()).collect(),
            None => manifest.classes.iter().map(|m| m.canonical()).collect(),
        };
        let labels = manifest
            .records
            .iter()
            .map(|r| {
                let mode = r.mode().canonical();
                classes.iter().position(|&c| c == mode).ok_or_else(|| {
                    Error::ClassSetMismatch(format!("{} in {} is not among the model's classes", mode, path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let images = manifest
            .records
            .par_iter()
            .map(|r| imageio::read_png(&root.join(&r.path)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledSet {
            split: manifest.split.clone(),
            classes,
            geometry: manifest.geometry,
            stats: manifest.stats,
            paths: manifest.records.iter().map(|r| r.path.clone()).collect(),
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn frame(&self, i: usize) -> Frame {
        Frame::from_gray(&self.images[i])
    }

    pub fn pixel_stats(&self) -> Option<PixelStats> {
        self.stats
            .or_else(|| PixelStats::from_bytes(self.images.iter().map(|img| img.data.as_slice())))
    }
}

/// Evaluation inputs, `N × px × px`, fitted and normalised.
pub fn eval_inputs(set: &LabeledSet, px: usize, fit: EvalFit, stats: PixelStats) -> Result<Vec<f32>> {
    let frames = (0..set.len())
        .into_par_iter()
        .map(|i| augment::eval_transform(&set.frame(i), px, fit, stats.mean, stats.std).map(|f| f.data))
        .collect::<Result<Vec<_>>>()?;
    Ok(frames.concat())
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode predictions for `N × px × px` inputs.
pub fn predict(model: &mut MicroResNet<f32>, inputs: &[f32], px: usize, batch: usize) -> Result<Vec<usize>> {
    let frame = px * px;
    let mut out = Vec::with_capacity(inputs.len() / frame);
    for chunk in inputs.chunks(frame * batch.max(1)) {
        let n = chunk.len() / frame;
        let logits = model.forward(&Tensor::new(&[n, 1, px, px], chunk.to_vec())?, Mode::Eval)?;
        out.extend(logits.data.chunks(logits.shape[1]).map(argmax));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<ModePair>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[ModePair]) -> Self {
        ConfusionMatrix {
            classes: classes.to_vec(),
            counts: vec![vec![0; classes.len()]; classes.len()],
        }
    }

    pub fn from_predictions(classes: &[ModePair], labels: &[usize], predictions: &[usize]) -> Self {
        let mut m = Self::new(classes);
        for (&t, &p) in labels.iter().zip(predictions) {
            m.counts[t][p] += 1;
        }
        m
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Share of misclassifications whose predicted class differs from the
    /// true class by one in a single mode order; `None` without errors.
    pub fn adjacent_share(&self) -> Option<f64> {
        let (mut errors, mut adjacent) = (0, 0);
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if t != p {
                    errors += c;
                    if self.classes[t].is_adjacent(self.classes[p]) {
                        adjacent += c;
                    }
                }
            }
        }
        (errors > 0).then(|| adjacent as f64 / errors as f64)
    }

    /// Off-diagonal cells, largest first: `(true, predicted, count)`.
    pub fn top_confusions(&self, k: usize) -> Vec<(ModePair, ModePair, usize)> {
        let mut cells: Vec<_> = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(t, row)| row.iter().enumerate().map(move |(p, &c)| (t, p, c)))
            .filter(|&(t, p, c)| t != p && c > 0)
            .map(|(t, p, c)| (self.classes[t], self.classes[p], c))
            .collect();
        cells.sort_by(|a, b| b.2.cmp(&a.2));
        cells.truncate(k);
        cells
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for c in &self.classes {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (c, row) in self.classes.iter().zip(&self.counts) {
            let _ = write!(s, "{c}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lr0: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub step_size: usize,
    pub gamma: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr0: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 20,
            step_size: 7,
            gamma: 0.1,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1], got {}", self.momentum)));
        }
        if !self.batch_size.is_power_of_two() || !(8..=256).contains(&self.batch_size) {
            return Err(Error::Config(format!("batch size must be a power of two in 8..=256, got {}", self.batch_size)));
        }
        if self.epochs == 0 || self.step_size == 0 || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("epochs and step size must be >= 1 and gamma in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hyperparams: Hyperparams,
    pub model: MicroResNetConfig,
    /// Crop scale/ratio and flip probability; mean and std are replaced by
    /// the training-set statistics.
    pub augment: AugmentConfig,
    pub eval_fit: EvalFit,
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hyperparams: Hyperparams::default(),
            model: MicroResNetConfig::default(),
            augment: AugmentConfig::default(),
            eval_fit: EvalFit::Auto,
            eval_batch: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub pexp_acc: Option<f64>,
}

pub const METRICS_HEADER: &str = "epoch,lr,train_loss,train_acc,val_acc,pexp_acc";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        let pexp = self.pexp_acc.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.lr, self.train_loss, self.train_acc, self.val_acc, pexp
        )
    }
}

pub fn metrics_csv(epochs: &[EpochMetrics]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for e in epochs {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

/// Wall-clock figures, kept apart from the reproducible outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timing {
    pub epoch_seconds: Vec<f64>,
    pub total_seconds: f64,
}

impl Timing {
    pub fn log(&self) -> String {
        let mut s = String::from("epoch,seconds\n");
        for (e, t) in self.epoch_seconds.iter().enumerate() {
            let _ = writeln!(s, "{e},{t:.3}");
        }
        let _ = writeln!(s, "total,{:.3}", self.total_seconds);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub hyperparams: Hyperparams,
    pub classes: Vec<ModePair>,
    pub parameters: usize,
    /// Loss of the very first mini-batch, before any update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_exp_acc: Option<f64>,
    /// Simulated-validation accuracy at the best epoch.
    pub corr_val_acc: f64,
    pub val_confusion: ConfusionMatrix,
    pub pexp_confusion: Option<ConfusionMatrix>,
    #[serde(skip)]
    pub timing: Timing,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains a fresh network on `train`, evaluating `val` (and `pexp`, when
/// given) after every epoch. The best epoch is chosen by pseudo-experimental
/// accuracy, or validation accuracy without a pseudo-experimental set.
///
/// With `out_dir`, writes `metrics.csv`, `report.json`, `confusion.csv`,
/// `best.ckpt` and the wall-clock sidecar `timing.log`.
pub fn train(
    cfg: &TrainConfig,
    train: &LabeledSet,
    val: &LabeledSet,
    pexp: Option<&LabeledSet>,
    out_dir: Option<&Path>,
) -> Result<TrainReport> {
    let start = Instant::now();
    let hp = &cfg.hyperparams;
    hp.validate()?;
    for other in std::iter::once(val).chain(pexp) {
        if other.classes != train.classes {
            return Err(Error::ClassSetMismatch(format!(
                "{} split labels {} classes, training uses {}",
                other.split,
                other.classes.len(),
                train.classes.len()
            )));
        }
    }
    if train.len() < 2 {
        return Err(Error::BatchTooSmall(train.len()));
    }
    let stats = train
        .pixel_stats()
        .filter(|s| s.std > 0.0)
        .ok_or_else(|| Error::Config("training images have no pixel variance".into()))?;
    let px = cfg.model.input_px;
    let model_cfg = MicroResNetConfig {
        classes: train.classes.len(),
        ..cfg.model.clone()
    };
    let aug = AugmentConfig {
        out_px: px,
        mean: stats.mean,
        std: stats.std,
        ..cfg.augment.clone()
    };
    aug.validate()?;
    let mut model = MicroResNet::<f32>::new(&model_cfg, &mut seed::rng(seed::derive(hp.seed, &[seed::stream::INIT])))?;
    let mut opt: Box<dyn Optimizer<f32>> = match hp.optimizer {
        OptimizerKind::Sgd => Box::new(Sgd::new(hp.momentum)),
        OptimizerKind::Adam => Box::new(Adam::new()),
    };
    let val_x = eval_inputs(val, px, cfg.eval_fit, stats)?;
    let pexp_x = pexp.map(|p| eval_inputs(p, px, cfg.eval_fit, stats)).transpose()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut epochs = Vec::with_capacity(hp.epochs);
    let mut timing = Timing::default();
    let mut initial_loss = None;
    let mut best: Option<(f64, usize, ConfusionMatrix, Option<ConfusionMatrix>)> = None;
    for epoch in 0..hp.epochs {
        let t0 = Instant::now();
        let lr = step_scheduler(hp.lr0, hp.gamma, hp.step_size, epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(hp.seed, &[seed::stream::SHUFFLE, epoch as u64])));
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        // a trailing batch of one cannot be batch-normalised; it is skipped
        for batch in order.chunks(hp.batch_size).filter(|b| b.len() >= 2) {
            let inputs: Vec<Vec<f32>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = seed::rng(seed::derive(hp.seed, &[seed::stream::AUGMENT, epoch as u64, i as u64]));
                    augment::train_transform(&train.frame(i), &aug, &mut rng).data
                })
                .collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let x = Tensor::new(&[batch.len(), 1, px, px], inputs.concat())?;
            model.zero_grad();
            let logits = model.forward(&x, Mode::Train)?;
            let (loss, grad) = nn::softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            initial_loss.get_or_insert(loss);
            model.backward(&grad)?;
            opt.step(&mut model, lr);
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
            correct += logits
                .data
                .chunks(logits.shape[1])
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
        }
        let val_pred = predict(&mut model, &val_x, px, cfg.eval_batch)?;
        let val_cm = ConfusionMatrix::from_predictions(&train.classes, &val.labels, &val_pred);
        let pexp_cm = match (pexp, &pexp_x) {
            (Some(set), Some(xs)) => {
                let pred = predict(&mut model, xs, px, cfg.eval_batch)?;
                Some(ConfusionMatrix::from_predictions(&train.classes, &set.labels, &pred))
            }
            _ => None,
        };
        let metrics = EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / seen.max(1) as f64,
            train_acc: correct as f64 / seen.max(1) as f64,
            val_acc: val_cm.accuracy(),
            pexp_acc: pexp_cm.as_ref().map(|c| c.accuracy()),
        };
        let score = metrics.pexp_acc.unwrap_or(metrics.val_acc);
        if best.as_ref().is_none_or(|b| score > b.0) {
            if let Some(dir) = out_dir {
                Checkpoint::from_model(&mut model, &train.classes, Some(stats), epoch, hp.seed).save(&dir.join("best.ckpt"))?;
            }
            best = Some((score, epoch, val_cm, pexp_cm));
        }
        epochs.push(metrics);
        timing.epoch_seconds.push(t0.elapsed().as_secs_f64());
        if let Some(dir) = out_dir {
            write_file(&dir.join("metrics.csv"), &metrics_csv(&epochs))?;
        }
    }
    timing.total_seconds = start.elapsed().as_secs_f64();
    let (_, best_epoch, val_confusion, pexp_confusion) = best.expect("at least one epoch");
    let report = TrainReport {
        hyperparams: hp.clone(),
        classes: train.classes.clone(),
        parameters: model.param_count(),
        initial_loss: initial_loss.unwrap_or(f64::NAN),
        best_exp_acc: epochs[best_epoch].pexp_acc,
        corr_val_acc: epochs[best_epoch].val_acc,
        epochs,
        best_epoch,
        val_confusion,
        pexp_confusion,
        timing,
    };
    if let Some(dir) = out_dir {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        write_file(&dir.join("report.json"), &json)?;
        let cm = report.pexp_confusion.as_ref().unwrap_or(&report.val_confusion);
        write_file(&dir.join("confusion.csv"), &cm.to_csv())?;
        write_file(&dir.join("timing.log"), &report.timing.log())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub path: String,
    pub truth: ModePair,
    pub predicted: ModePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

/// Top-1 evaluation of a checkpoint on a manifest whose classes the
/// checkpoint covers.
pub fn evaluate(checkpoint: &Checkpoint, manifest: &Path, fit: EvalFit) -> Result<Evaluation> {
    let classes = &checkpoint.header.classes;
    let set = LabeledSet::load(manifest, Some(classes))?;
    let stats = checkpoint
        .header
        .stats
        .ok_or_else(|| Error::Config("checkpoint lacks normalisation statistics".into()))?;
    let mut model = checkpoint.build::<f32>()?;
    let px = checkpoint.header.config.input_px;
    let inputs = eval_inputs(&set, px, fit, stats)?;
    let pred = predict(&mut model, &inputs, px, 128)?;
    let confusion = ConfusionMatrix::from_predictions(classes, &set.labels, &pred);
    let predictions = set
        .paths
        .iter()
        .zip(&set.labels)
        .zip(&pred)
        .map(|((path, &t), &p)| Prediction {
            path: path.clone(),
            truth: classes[t],
            predicted: classes[p],
        })
        .collect();
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
        predictions,
    })
}
