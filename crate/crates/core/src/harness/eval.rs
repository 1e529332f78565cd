use std::time::Instant;

use super::metrics::{compute_mae, compute_rmse, MetricsReport};
use crate::baselines::Predictor;
use crate::dataset::{DatasetSplit, Region, SampleWindow};
use crate::error::{arg_err, Error, Result};
use crate::tensor::RealTensor;

/// Evaluates `predictor` on every test window that has `horizon` targets.
/// The score at horizon `h` is the error of the `h`-th forecast frame.
/// Frames are de-normalized before scoring.
pub fn evaluate(
    predictor: &dyn Predictor,
    split: &DatasetSplit,
    history: usize,
    horizon: usize,
) -> Result<MetricsReport> {
    let windows = split.windows(Region::Test, history, horizon);
    evaluate_windows(predictor, split, &windows, horizon)
}

pub(crate) fn evaluate_windows(
    predictor: &dyn Predictor,
    split: &DatasetSplit,
    windows: &[SampleWindow],
    horizon: usize,
) -> Result<MetricsReport> {
    if horizon == 0 {
        return arg_err("horizon must be at least 1");
    }
    let Some(first) = windows.first() else {
        return arg_err("test set has no windows for this history and horizon");
    };
    let test_start = split.region_range(Region::Test).start;
    let frames = split.frames();
    let mut preds = Vec::with_capacity(windows.len());
    let mut truths = Vec::with_capacity(windows.len());
    let mut elapsed = 0.0;
    for w in windows {
        if w.t_index < test_start {
            return Err(Error::InvalidArgument(format!(
                "window at {} lies before the test region at {test_start}",
                w.t_index
            )));
        }
        let start = Instant::now();
        let mut out = predictor.predict_multi(w.history(frames), horizon)?;
        elapsed += start.elapsed().as_secs_f64();
        let p = out.pop().expect("horizon frames");
        if !p.is_finite() {
            return Err(Error::Numerical(format!(
                "{} produced a non-finite forecast for target {}",
                predictor.name(),
                w.t_index
            )));
        }
        preds.push(split.denormalize(&p));
        truths.push(split.denormalize(&frames[w.t_index + horizon - 1]));
    }
    let dims = split.dims();
    let total_ms = elapsed * 1e3;
    Ok(MetricsReport {
        predictor: predictor.name().to_owned(),
        horizon,
        history: first.history_len,
        samples: windows.len(),
        rmse: compute_rmse(&preds, &truths, dims)?,
        mae: compute_mae(&preds, &truths, dims)?,
        infer_ms: total_ms / windows.len() as f64,
        total_ms,
        params: predictor.param_count(),
        first_target: windows.iter().map(|w| w.t_index).min().unwrap_or(0),
        test_start,
    })
}

/// Single-sample inference timing: `warmup` untimed predictions, then the
/// mean over `runs` timed ones cycling through the test windows. Accuracy
/// is scored over the timed predictions.
pub fn bench(
    predictor: &dyn Predictor,
    split: &DatasetSplit,
    history: usize,
    warmup: usize,
    runs: usize,
) -> Result<MetricsReport> {
    let windows = split.windows(Region::Test, history, 1);
    if windows.is_empty() || runs == 0 {
        return arg_err("bench needs test windows and at least one run");
    }
    let frames = split.frames();
    for w in windows.iter().cycle().take(warmup) {
        predictor.predict(w.history(frames))?;
    }
    let mut preds: Vec<RealTensor> = Vec::with_capacity(runs);
    let mut truths = Vec::with_capacity(runs);
    let mut elapsed = 0.0;
    for w in windows.iter().cycle().take(runs) {
        let start = Instant::now();
        let p = predictor.predict(w.history(frames))?;
        elapsed += start.elapsed().as_secs_f64();
        preds.push(split.denormalize(&p));
        truths.push(split.denormalize(&frames[w.t_index]));
    }
    let dims = split.dims();
    Ok(MetricsReport {
        predictor: predictor.name().to_owned(),
        horizon: 1,
        history,
        samples: runs,
        rmse: compute_rmse(&preds, &truths, dims)?,
        mae: compute_mae(&preds, &truths, dims)?,
        infer_ms: elapsed * 1e3 / runs as f64,
        total_ms: elapsed * 1e3,
        params: predictor.param_count(),
        first_target: windows[0].t_index,
        test_start: split.region_range(Region::Test).start,
    })
}
