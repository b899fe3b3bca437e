//! Random hyperparameter search with a step scheduler.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{train, Hyperparams, LabeledSet, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    /// Initial learning rate bounds, sampled log-uniformly.
    pub lr: (f64, f64),
    pub momentum: (f64, f64),
    /// Batch size is `2^l` with `l` uniform over this inclusive range.
    pub log2_batch: (u32, u32),
    pub step_size: usize,
    pub gamma: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lr: (0.001, 0.1),
            momentum: (0.0, 1.0),
            log2_batch: (3, 8),
            step_size: 7,
            gamma: 0.1,
        }
    }
}

impl SearchSpace {
    pub fn sample(&self, rng: &mut impl Rng, epochs: usize, seed: u64) -> Hyperparams {
        let (l0, l1) = (self.lr.0.ln(), self.lr.1.ln());
        Hyperparams {
            lr0: rng.random_range(l0..=l1).exp(),
            momentum: rng.random_range(self.momentum.0..=self.momentum.1),
            batch_size: 1 << rng.random_range(self.log2_batch.0..=self.log2_batch.1),
            epochs,
            step_size: self.step_size,
            gamma: self.gamma,
            optimizer: OptimizerKind::Sgd,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub hyperparams: Hyperparams,
    pub best_exp_acc: Option<f64>,
    pub corr_val_acc: Option<f64>,
    pub best_epoch: Option<usize>,
    /// `ok`, or the error that ended the trial.
    pub status: String,
}

impl TrialResult {
    fn score(&self) -> f64 {
        self.best_exp_acc.or(self.corr_val_acc).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Hyperparameters of every trial, drawn up front so they do not depend on
/// how earlier trials went.
pub fn sample_trials(space: &SearchSpace, trials: usize, epochs: usize, seed: u64) -> Vec<Hyperparams> {
    (0..trials as u64)
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, &[seed::stream::SEARCH, t]));
            space.sample(&mut rng, epochs, seed::derive(seed, &[seed::stream::SEARCH, t, 1]))
        })
        .collect()
}

/// Trains one network per sampled trial and returns the trials ranked by
/// best pseudo-experimental accuracy (validation accuracy without one).
/// A failing trial is recorded and the sweep continues. With `out_dir`,
/// each trial writes into `trial_NNN/` and the table goes to `search.csv`.
pub fn random_search(
    base: &TrainConfig,
    space: &SearchSpace,
    trials: usize,
    epochs: usize,
    seed: u64,
    data: (&LabeledSet, &LabeledSet, Option<&LabeledSet>),
    out_dir: Option<&Path>,
) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(Error::Config("a search needs at least one trial".into()));
    }
    let (train_set, val, pexp) = data;
    let mut results = Vec::with_capacity(trials);
    for (t, hp) in sample_trials(space, trials, epochs, seed).into_iter().enumerate() {
        let cfg = TrainConfig {
            hyperparams: hp.clone(),
            ..base.clone()
        };
        let dir = out_dir.map(|d| d.join(format!("trial_{t:03}")));
        let outcome = train(&cfg, train_set, val, pexp, dir.as_deref());
        results.push(match outcome {
            Ok(r) => TrialResult {
                trial: t,
                hyperparams: hp,
                best_exp_acc: r.best_exp_acc,
                corr_val_acc: Some(r.corr_val_acc),
                best_epoch: Some(r.best_epoch),
                status: "ok".into(),
            },
            Err(e @ (Error::Io { .. } | Error::ClassSetMismatch(_))) => return Err(e),
            Err(e) => TrialResult {
                trial: t,
                hyperparams: hp,
                best_exp_acc: None,
                corr_val_acc: None,
                best_epoch: None,
                status: e.to_string(),
            },
        });
    }
    results.sort_by(|a, b| b.score().total_cmp(&a.score()).then(a.trial.cmp(&b.trial)));
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("search.csv");
        std::fs::write(&path, search_csv(&results)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(results)
}

pub const SEARCH_HEADER: &str = "rank,trial,learning_rate,momentum,batch_size,best_exp_acc,corr_acc,best_epoch,seed,status";

pub fn search_csv(results: &[TrialResult]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = format!("{SEARCH_HEADER}\n");
    for (rank, r) in results.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            rank + 1,
            r.trial,
            r.hyperparams.lr0,
            r.hyperparams.momentum,
            r.hyperparams.batch_size,
            opt(r.best_exp_acc),
            opt(r.corr_val_acc),
            r.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
            r.hyperparams.seed,
            r.status.replace([',', '\n'], ";"),
        );
    }
    s
}
