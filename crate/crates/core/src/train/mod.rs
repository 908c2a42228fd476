//! Mini-batch training with validation-loss early stopping and best-accuracy selection.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::encoder::{batch_iter, LabeledDataset, Split};
use crate::nn::{loss, predict, save_checkpoint, AdamConfig, LossConfig, Mode, Model, NnError};
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub seed: u64,
    /// Where the best model is written whenever it changes.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 200,
            patience: 30,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            seed: 0,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
            || self.patience > self.max_epochs
        {
            return Err(TrainError::Config(format!(
                "need positive batch size, epochs and patience with patience <= epochs (got {}, {}, {})",
                self.batch_size, self.max_epochs, self.patience
            )));
        }
        if !(self.adam.lr > 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate {} must be positive",
                self.adam.lr
            )));
        }
        self.loss.validate()?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite training loss in epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    /// Validation loss did not improve for `patience` epochs.
    Patience,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) with the highest validation accuracy; earliest on ties.
    pub best_epoch: usize,
    pub stop: StopReason,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in &self.epochs {
            writeln!(
                s,
                "{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.val_acc
            )
            .expect("write to string");
        }
        s
    }
}

/// Seed for everything random inside one epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut z = seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One pass over the shuffled training split; returns the sample-weighted mean batch loss.
pub fn run_epoch<T: Scalar>(
    model: &mut Model<T>,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64, TrainError> {
    let seed = epoch_seed(cfg.seed, epoch);
    let mut total = 0.0;
    let mut seen = 0usize;
    for (bi, batch) in batch_iter::<T>(ds, Split::Train, cfg.batch_size, seed, true).enumerate() {
        let (out, grads) = model.loss_and_gradients(
            &batch.images,
            &batch.labels,
            &cfg.loss,
            Mode::Train { seed },
            bi * cfg.batch_size,
        )?;
        let l = out.total.as_f64();
        if !l.is_finite() {
            return Err(TrainError::Diverged { epoch, batch: bi });
        }
        model.adam_step(&grads, &cfg.adam);
        total += l * batch.indices.len() as f64;
        seen += batch.indices.len();
    }
    Ok(total / seen as f64)
}

/// Inference over a split in index order: probabilities for every sample and one-hot labels.
pub fn predict_split<T: Scalar>(
    model: &Model<T>,
    ds: &LabeledDataset,
    split: Split,
    batch_size: usize,
) -> Result<(Tensor<T>, Tensor<T>), NnError> {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for batch in batch_iter::<T>(ds, split, batch_size, 0, false) {
        probs.push(model.forward(&batch.images)?);
        labels.push(batch.labels);
    }
    if probs.is_empty() {
        return Ok((Tensor::zeros(&[0, 2]), Tensor::zeros(&[0, 2])));
    }
    Ok((Tensor::concat_batch(&probs), Tensor::concat_batch(&labels)))
}

/// Loss of the whole split as one batch (dropout off) and accuracy.
pub fn evaluate_split<T: Scalar>(
    model: &Model<T>,
    ds: &LabeledDataset,
    split: Split,
    cfg: &TrainConfig,
) -> Result<(f64, f64), NnError> {
    let (probs, labels) = predict_split(model, ds, split, cfg.batch_size)?;
    let l = loss(&probs, &labels, model, &cfg.loss).total.as_f64();
    let pred = predict(&probs);
    let correct = pred
        .iter()
        .enumerate()
        .filter(|&(i, &p)| labels[2 * i + p] == T::one())
        .count();
    Ok((l, correct as f64 / pred.len() as f64))
}

/// Trains until `max_epochs` or `patience` epochs without a validation-loss improvement and
/// returns the parameters from the epoch with the best validation accuracy.
pub fn train<T: Scalar>(
    model: Model<T>,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainHistory), TrainError> {
    train_with(model, ds, cfg, |_| {})
}

pub fn train_with<T: Scalar>(
    mut model: Model<T>,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model<T>, TrainHistory), TrainError> {
    cfg.validate()?;
    if ds.splits.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if ds.splits.val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let mut best = model.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    for epoch in 1..=cfg.max_epochs {
        let train_loss = run_epoch(&mut model, ds, cfg, epoch)?;
        let (val_loss, val_acc) = evaluate_split(&model, ds, Split::Val, cfg)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                batch: usize::MAX,
            });
        }
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
        };
        on_epoch(&rec);
        epochs.push(rec);
        if val_acc > best_acc {
            best_acc = val_acc;
            best_epoch = epoch;
            best = model.clone();
            if let Some(path) = &cfg.checkpoint {
                save_checkpoint(&best, path)?;
            }
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stop = StopReason::Patience;
                break;
            }
        }
    }
    Ok((
        best,
        TrainHistory {
            epochs,
            best_epoch,
            stop,
        },
    ))
}
