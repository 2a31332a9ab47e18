use serde::{Deserialize, Serialize};

use crate::data::{make_batches, Dataset};
use crate::error::{Error, Result};
use crate::seed::{self, streams};

use super::{AdamState, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Number of batches that make up one epoch.
    pub batches_per_epoch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
    /// Global-norm gradient clipping threshold.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            batches_per_epoch: 50,
            max_epochs: 200,
            patience: 10,
            lr: 1e-3,
            seed: 1,
            clip_norm: Some(10.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::Config("batch size and batches per epoch must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// One row of the training log. Epoch 0 is the initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean NLL per target value over the epoch's batches (NaN at epoch 0).
    pub train_nll: f64,
    /// Mean NLL per target value on the validation windows.
    pub val_nll: f64,
    pub best_val_nll: f64,
}

/// Patience-based stopping rule over a sequence of validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    /// Starts from the loss of the initial parameters (epoch 0).
    pub fn new(patience: usize, initial: f64) -> Self {
        Self {
            patience,
            best: initial,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records the loss of `epoch` and returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation NLL seen, possibly the
    /// initialization.
    pub network: Network,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

/// The `c` values ending at 1-based index `end`, zero-padded on the left
/// when the series starts later. The flag reports padding.
pub fn context_window(values: &[f64], end: usize, c: usize) -> (Vec<f64>, bool) {
    if end >= c {
        (values[end - c..end].to_vec(), false)
    } else {
        let mut x = vec![0.0; c - end];
        x.extend_from_slice(&values[..end]);
        (x, true)
    }
}

/// Mean NLL per target value of the window whose targets are the
/// validation segment `T−h+1..=T` of every series.
pub fn validation_nll(net: &Network, ds: &Dataset, scales: &[f64]) -> Result<f64> {
    let split = ds.split();
    let end = split.validation.start;
    let mut total = 0.0;
    for (ts, &s) in ds.series().iter().zip(scales) {
        let (x, _) = context_window(ts.values(), end, net.context());
        total += net.nll(&x, &ts.values()[split.validation.clone()], s)?;
    }
    Ok(total / (ds.len() * net.horizon()) as f64)
}

/// Minimizes the summed head NLL of training windows with Adam, keeping the
/// parameters with the best validation NLL.
pub fn train(mut net: Network, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if net.context() != ds.context() || net.horizon() != ds.horizon() {
        return Err(Error::Config(format!(
            "network (context {}, horizon {}) does not match dataset (context {}, horizon {})",
            net.context(),
            net.horizon(),
            ds.context(),
            ds.horizon()
        )));
    }
    let scales: Vec<f64> = ds.stats().iter().map(|s| s.scale).collect();
    let (c, h) = (ds.context(), ds.horizon());
    let mut batches = make_batches(ds, cfg.batch_size, seed::derive(cfg.seed, streams::BATCHES))?;
    let mut adam = AdamState::new(net.n_params(), cfg.lr);
    let mut grad = vec![0.0; net.n_params()];

    let initial = validation_nll(&net, ds, &scales)?;
    let mut stopper = EarlyStopping::new(cfg.patience, initial);
    let mut best = net.clone();
    let mut log = vec![EpochRecord {
        epoch: 0,
        train_nll: f64::NAN,
        val_nll: initial,
        best_val_nll: initial,
    }];

    for epoch in 1..=cfg.max_epochs {
        let mut epoch_loss = 0.0;
        for batch_index in 0..cfg.batches_per_epoch {
            let batch = batches.next().expect("batch stream is endless");
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &(i, w) in &batch.pairs {
                let values = ds.series()[i].values();
                let loss = net.nll_and_grad(&values[w - c..w], &values[w..w + h], scales[i], &mut grad)?;
                if !loss.is_finite() {
                    return Err(Error::TrainingDiagnostic {
                        epoch,
                        batch: batch_index,
                        series: ds.series()[i].id().to_string(),
                        window_end: w,
                    });
                }
                epoch_loss += loss;
            }
            let n = batch.pairs.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            if let Some(max_norm) = cfg.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    grad.iter_mut().for_each(|g| *g *= max_norm / norm);
                }
            }
            if grad.iter().any(|g| !g.is_finite()) {
                let &(i, w) = batch.pairs.first().expect("non-empty batch");
                return Err(Error::TrainingDiagnostic {
                    epoch,
                    batch: batch_index,
                    series: ds.series()[i].id().to_string(),
                    window_end: w,
                });
            }
            adam.step(net.params_mut().values_mut(), &grad);
        }
        let train_nll = epoch_loss / (cfg.batches_per_epoch * cfg.batch_size * h) as f64;
        let val_nll = validation_nll(&net, ds, &scales)?;
        if stopper.observe(epoch, val_nll) {
            best = net.clone();
        }
        log.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
            best_val_nll: stopper.best(),
        });
        if stopper.should_stop() {
            break;
        }
    }
    Ok(TrainOutcome {
        network: best,
        best_epoch: stopper.best_epoch(),
        log,
    })
}

/// Writes the training log as CSV with header
/// `epoch,train_nll,val_nll,best_val_nll`.
pub fn write_log<W: std::io::Write>(writer: W, log: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for rec in log {
        w.serialize(rec)?;
    }
    w.flush().map_err(|e| Error::io("<training log>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopping_rule_with_unit_patience() {
        // Improves at epoch 1, then never again: stop after epoch 2.
        let mut stop = EarlyStopping::new(1, 10.0);
        stop.observe(1, 4.0);
        assert!(!stop.should_stop());
        stop.observe(2, 4.0);
        assert!(stop.should_stop());
        assert_eq!(stop.best_epoch(), 1);
    }

    #[test]
    fn padded_context() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(context_window(&v, 3, 2), (vec![2.0, 3.0], false));
        assert_eq!(context_window(&v, 2, 4), (vec![0.0, 0.0, 1.0, 2.0], true));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
