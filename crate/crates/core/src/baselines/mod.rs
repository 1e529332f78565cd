//! Comparison predictors and the interface shared with the main model.
//!
//! Stateless: [`RepeatLast`], [`LinearTrend`], [`MovingAverage`].
//! Trained: [`TimeLinear`] (shared per-entry MLP over time) and [`DLinear`]
//! (per-entry trend/remainder linear maps).

use std::collections::VecDeque;

use crate::error::{arg_err, shape_err, Result};
use crate::ldformer::Ldformer;
use crate::tensor::RealTensor;

mod dlinear;
mod time_linear;

pub use dlinear::{decompose, DLinear, DLINEAR_DEFAULT_KERNEL};
pub use time_linear::TimeLinear;

/// Settings for fitting the trainable baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub history_len: usize,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            history_len: 10,
            lr: 1e-3,
            batch: 8,
            max_epochs: 30,
            patience: 10,
            seed: 0,
        }
    }
}

/// One-step channel forecaster over frames `[2, S, S]`, oldest first.
pub trait Predictor {
    fn name(&self) -> &str;

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor>;

    /// Forecast of `horizon` frames. The default feeds each prediction back
    /// into a sliding window of the original length.
    fn predict_multi(&self, history: &[RealTensor], horizon: usize) -> Result<Vec<RealTensor>> {
        if horizon == 0 {
            return arg_err("horizon must be at least 1");
        }
        let mut window: VecDeque<RealTensor> = history.iter().cloned().collect();
        let mut out = Vec::with_capacity(horizon);
        for step in 0..horizon {
            let next = self.predict(window.make_contiguous())?;
            if step + 1 < horizon {
                window.pop_front();
                window.push_back(next.clone());
            }
            out.push(next);
        }
        Ok(out)
    }

    /// Number of trainable scalars.
    fn param_count(&self) -> usize {
        0
    }
}

fn check_history(history: &[RealTensor]) -> Result<()> {
    let Some(first) = history.first() else {
        return arg_err("empty history");
    };
    if let Some(bad) = history.iter().find(|f| f.shape() != first.shape()) {
        return shape_err(format!("history mixes shapes {:?} and {:?}", first.shape(), bad.shape()));
    }
    Ok(())
}

/// Persistence forecast: the most recent frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct RepeatLast;

impl Predictor for RepeatLast {
    fn name(&self) -> &str {
        "repeat-last"
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        check_history(history)?;
        Ok(history[history.len() - 1].clone())
    }
}

/// Two-point extrapolation `2·H[t−1] − H[t−2]`; repeats the last frame when
/// only one is available.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearTrend;

impl Predictor for LinearTrend {
    fn name(&self) -> &str {
        "linear-trend"
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        check_history(history)?;
        let n = history.len();
        let last = &history[n - 1];
        if n == 1 {
            return Ok(last.clone());
        }
        let prev = history[n - 2].data();
        let data = last.data().iter().zip(prev).map(|(a, b)| 2.0 * a - b).collect();
        Ok(RealTensor::from_parts(last.shape().to_vec(), data))
    }
}

/// Mean of the last `min(W, L)` frames; `None` averages the whole history.
#[derive(Debug, Clone, Copy, Default)]
pub struct MovingAverage {
    pub window: Option<usize>,
}

impl MovingAverage {
    pub fn new(window: Option<usize>) -> Result<Self> {
        if window == Some(0) {
            return arg_err("moving-average window must be positive");
        }
        Ok(Self { window })
    }
}

impl Predictor for MovingAverage {
    fn name(&self) -> &str {
        "moving-average"
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        check_history(history)?;
        let w = self.window.unwrap_or(history.len()).min(history.len()).max(1);
        let recent = &history[history.len() - w..];
        let mut data = vec![0.0; recent[0].len()];
        for f in recent {
            data.iter_mut().zip(f.data()).for_each(|(a, b)| *a += b);
        }
        data.iter_mut().for_each(|v| *v /= w as f64);
        Ok(RealTensor::from_parts(recent[0].shape().to_vec(), data))
    }
}

impl Predictor for Ldformer {
    fn name(&self) -> &str {
        "ldformer"
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        self.predict_one(history)
    }

    fn predict_multi(&self, history: &[RealTensor], horizon: usize) -> Result<Vec<RealTensor>> {
        Ldformer::predict_multi(self, history, horizon)
    }

    fn param_count(&self) -> usize {
        self.parameter_count()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        (**self).predict(history)
    }

    fn predict_multi(&self, history: &[RealTensor], horizon: usize) -> Result<Vec<RealTensor>> {
        (**self).predict_multi(history, horizon)
    }

    fn param_count(&self) -> usize {
        (**self).param_count()
    }
}

/// The last `len` frames of `history`, or an error when it is shorter.
pub(crate) fn tail(history: &[RealTensor], len: usize) -> Result<&[RealTensor]> {
    check_history(history)?;
    if history.len() < len {
        return arg_err(format!("model needs {len} history frames, got {}", history.len()));
    }
    Ok(&history[history.len() - len..])
}
