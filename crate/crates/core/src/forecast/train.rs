use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ForecastModel, ModelWeights};
use crate::error::{Error, Result};
use crate::ingest::HistoricalMoments;
use crate::network::DemandTensor;

/// One supervised example: `lag` past counts, historical averages of the
/// `horizon` target intervals, and the realized target counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub lags: Array2<f64>,
    pub hist: Array2<f64>,
    pub target: Array2<f64>,
}

/// Every sample a day tensor supports, in interval order.
pub fn day_samples(day: &DemandTensor, moments: &HistoricalMoments, lag: usize, horizon: usize) -> Vec<Sample> {
    let n = day.regions();
    let k_max = day.intervals().min(moments.intervals());
    let mut out = Vec::new();
    for t in lag..=k_max.saturating_sub(horizon) {
        let lags = Array2::from_shape_fn((n, lag), |(i, l)| day.get(i, t - lag + l) as f64);
        let hist = moments.mu.slice(s![.., t..t + horizon]).to_owned();
        let target = Array2::from_shape_fn((n, horizon), |(i, h)| day.get(i, t + h) as f64);
        out.push(Sample { lags, hist, target });
    }
    out
}

/// Samples grouped into day batches, split chronologically.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub train: Vec<Vec<Sample>>,
    pub validation: Vec<Vec<Sample>>,
}

impl Dataset {
    /// The last `validation_days` days (in the given chronological order)
    /// become the validation split.
    pub fn chronological(days: Vec<Vec<Sample>>, validation_days: usize) -> Self {
        let cut = days.len().saturating_sub(validation_days);
        let mut train = days;
        let validation = train.split_off(cut);
        Dataset { train, validation }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, learning_rate: 0.01, momentum: 0.9, patience: 10, clip_norm: 5.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_nll: f64,
    pub validation_nll: f64,
    /// Best validation NLL seen so far; non-increasing along the trace.
    pub best_validation_nll: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights of the best validation epoch.
    pub model: ForecastModel,
    pub trace: Vec<EpochLoss>,
    pub best_epoch: Option<usize>,
}

fn cells(batch: &[Sample]) -> usize {
    batch.iter().map(|s| s.target.len()).sum()
}

/// Mean per-cell NLL over a set of day batches.
pub fn mean_nll(model: &ForecastModel, days: &[Vec<Sample>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    let fam = model.config.family;
    for s in days.iter().flatten() {
        let f = model.forward(&s.lags, &s.hist)?;
        for i in 0..f.regions {
            for h in 0..f.horizon {
                total += fam.nll(f.theta(i, h), s.target[[i, h]])?;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData("no samples to evaluate".into()));
    }
    Ok(total / count as f64)
}

/// Mean per-cell NLL of one batch and its gradient.
pub fn batch_gradient(model: &ForecastModel, batch: &[Sample]) -> Result<(f64, ModelWeights)> {
    let mut grad = model.weights.zeros_like();
    let mut loss = 0.0;
    for s in batch {
        let (l, g) = model.loss_and_grad(&s.lags, &s.hist, &s.target)?;
        loss += l;
        grad.axpy(1.0, &g);
    }
    let n = cells(batch).max(1) as f64;
    grad.scale(1.0 / n);
    Ok((loss / n, grad))
}

/// Momentum gradient descent on the NLL, one day per step, with early
/// stopping on validation NLL. Training-day order is shuffled per epoch
/// from `cfg.seed`.
pub fn train(model: &ForecastModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut current = model.clone();
    let mut best = model.clone();
    let mut trace = Vec::new();
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { model: best, trace, best_epoch: None });
    }
    if data.train.iter().all(|d| d.is_empty()) {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    let selection: &[Vec<Sample>] = if data.validation.iter().any(|d| !d.is_empty()) {
        &data.validation
    } else {
        &data.train
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = current.weights.zeros_like();
    let mut best_val = mean_nll(&current, selection)?;
    let mut best_epoch = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for &d in &order {
            let batch = &data.train[d];
            if batch.is_empty() {
                continue;
            }
            let (loss, mut grad) = batch_gradient(&current, batch)?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss {loss} at epoch {epoch}, day {d}")));
            }
            let norm = grad.norm();
            if norm > cfg.clip_norm {
                grad.scale(cfg.clip_norm / norm);
            }
            velocity.scale(cfg.momentum);
            velocity.axpy(-cfg.learning_rate, &grad);
            current.weights.axpy(1.0, &velocity);
            epoch_loss += loss;
            batches += 1;
        }
        let val = mean_nll(&current, selection)?;
        if !val.is_finite() {
            return Err(Error::Diverged(format!("validation NLL became {val} at epoch {epoch}")));
        }
        if val < best_val {
            best_val = val;
            best = current.clone();
            best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        trace.push(EpochLoss {
            epoch,
            train_nll: epoch_loss / batches.max(1) as f64,
            validation_nll: val,
            best_validation_nll: best_val,
        });
        if stale > cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome { model: best, trace, best_epoch })
}
