use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of training ILs held out for early stopping.
    pub validation_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            batch_size: 256,
            max_epochs: 500,
            patience: 20,
            validation_fraction: 0.1,
            folds: 10,
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "need 0 < patience < max_epochs, got patience {} and {} epochs",
                self.patience, self.max_epochs
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("{} folds leave nothing to hold out", self.folds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Monitored loss at the best epoch (validation if there was a validation set).
    pub best_loss: f64,
    pub train_loss: Vec<f64>,
    pub monitor_loss: Vec<f64>,
}

/// Mini-batch training with early stopping.
///
/// `step` trains on one batch of training-row indices and returns the batch
/// loss. `monitor` scores the current model, normally on the validation
/// slice; the copy with the lowest monitored loss is restored at the end.
/// Batch order is reshuffled every epoch from `(seed, epoch)`.
pub fn fit<M: Clone>(
    model: &mut M,
    n_train: usize,
    settings: &TrainSettings,
    seed: u64,
    mut step: impl FnMut(&mut M, &[usize], &mut ChaCha8Rng) -> Result<f64>,
    mut monitor: impl FnMut(&M) -> Result<f64>,
) -> Result<FitSummary> {
    settings.validate()?;
    if n_train == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut best = model.clone();
    let mut summary = FitSummary {
        epochs_run: 0,
        best_epoch: 0,
        best_loss: f64::INFINITY,
        train_loss: Vec::new(),
        monitor_loss: Vec::new(),
    };
    for epoch in 0..settings.max_epochs {
        let mut rng = seed::rng(seed::derive(seed, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(settings.batch_size) {
            total += step(model, batch, &mut rng)? * batch.len() as f64;
        }
        let loss = monitor(model)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("monitored loss at epoch {epoch}")));
        }
        summary.train_loss.push(total / n_train as f64);
        summary.monitor_loss.push(loss);
        summary.epochs_run = epoch + 1;
        if loss < summary.best_loss {
            summary.best_loss = loss;
            summary.best_epoch = epoch;
            best = model.clone();
        } else if epoch - summary.best_epoch >= settings.patience {
            break;
        }
    }
    *model = best;
    Ok(summary)
}

/// Mean absolute difference of two equally shaped matrices; the early-stopping
/// monitor, on scaled targets.
pub fn mean_abs_error(pred: &Matrix, target: &Matrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", pred.shape(), target.shape())));
    }
    if pred.data().is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = pred.data().iter().zip(target.data()).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / pred.data().len() as f64)
}
