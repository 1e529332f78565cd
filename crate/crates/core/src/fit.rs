//! Minibatch loop with early stopping, shared by every trainable predictor.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SampleWindow;
use crate::error::{Error, Result};

/// Loss history of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_val: f64,
    pub seconds: f64,
}

/// Per-epoch progress passed to an observer.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

pub(crate) struct LoopSettings {
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

/// Shuffles `train` every epoch, calls `step` per minibatch (returning the
/// batch loss), scores `val` (or `train` when `val` is empty) with `eval`,
/// and restores the best-scoring model at the end.
pub(crate) fn early_stopping<M: Clone>(
    model: &mut M,
    settings: &LoopSettings,
    train: &[SampleWindow],
    val: &[SampleWindow],
    mut step: impl FnMut(&mut M, &[SampleWindow]) -> Result<f64>,
    mut eval: impl FnMut(&M, &[SampleWindow]) -> Result<f64>,
    mut observer: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    if settings.batch == 0 || settings.max_epochs == 0 {
        return Err(Error::InvalidArgument("batch and max_epochs must be positive".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let mut order = train.to_vec();
    let scored = if val.is_empty() { train } else { val };
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        best_val: f64::INFINITY,
        seconds: 0.0,
    };
    let mut best = model.clone();
    let mut since_best = 0;
    for epoch in 1..=settings.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(settings.batch).enumerate() {
            let loss = step(model, chunk)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            sum += loss * chunk.len() as f64;
        }
        let train_loss = sum / order.len() as f64;
        let val_loss = eval(model, scored)?;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite validation loss at epoch {epoch}")));
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.stopped_epoch = epoch;
        observer(&EpochStats {
            epoch,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
        if val_loss < report.best_val {
            report.best_val = val_loss;
            report.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= settings.patience {
                break;
            }
        }
    }
    *model = best;
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Checks that every window has `len` history frames and a target inside
/// `frame_count` frames.
pub(crate) fn check_windows(frame_count: usize, windows: &[SampleWindow], len: usize) -> Result<()> {
    for w in windows {
        if w.history_len != len || w.t_index < len || w.t_index >= frame_count {
            return Err(Error::InvalidArgument(format!(
                "window {w:?} does not fit history {len} over {frame_count} frames"
            )));
        }
    }
    Ok(())
}
