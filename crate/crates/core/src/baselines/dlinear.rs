use super::{tail, FitConfig, Predictor};
use crate::autodiff::{AdamConfig, AdamState, ParamSet};
use crate::dataset::SampleWindow;
use crate::error::{arg_err, shape_err, Result};
use crate::fit::{check_windows, early_stopping, EpochStats, LoopSettings, TrainReport};
use crate::tensor::RealTensor;

/// Moving-average kernel used when L = 10.
pub const DLINEAR_DEFAULT_KERNEL: usize = 5;

/// Splits `series` into a moving-average trend (edge-replicated, centred,
/// odd and even kernels alike) and the remainder.
pub fn decompose(series: &[f64], kernel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = series.len();
    if kernel == 0 || kernel > n {
        return arg_err(format!("moving-average kernel {kernel} must be in 1..={n}"));
    }
    let mut trend = vec![0.0; n];
    let mut remainder = vec![0.0; n];
    trend_into(series, kernel, &mut trend);
    for i in 0..n {
        remainder[i] = series[i] - trend[i];
    }
    Ok((trend, remainder))
}

fn trend_into(series: &[f64], kernel: usize, out: &mut [f64]) {
    let n = series.len() as isize;
    let front = ((kernel - 1) / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let start = i as isize - front;
        let mut s = 0.0;
        for j in start..start + kernel as isize {
            s += series[j.clamp(0, n - 1) as usize];
        }
        *o = s / kernel as f64;
    }
}

/// Decomposition-linear forecaster with individual weights per real entry:
/// one `L → 1` map on the trend and one on the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct DLinear {
    history_len: usize,
    kernel: usize,
    params: ParamSet,
}

const TW: &str = "dl.trend.weight";
const TB: &str = "dl.trend.bias";
const RW: &str = "dl.remainder.weight";
const RB: &str = "dl.remainder.bias";

impl DLinear {
    /// Weights start at `1/L`, so the untrained model predicts the history
    /// mean.
    pub fn init(entries: usize, history_len: usize, kernel: usize) -> Result<Self> {
        if entries == 0 || history_len == 0 {
            return arg_err("entries and history_len must be positive");
        }
        if kernel == 0 || kernel > history_len {
            return arg_err(format!("moving-average kernel {kernel} must be in 1..={history_len}"));
        }
        let w = RealTensor::full(&[entries, history_len], 1.0 / history_len as f64);
        let mut params = ParamSet::new();
        params.push(TW, w.clone())?;
        params.push(TB, RealTensor::zeros(&[entries]))?;
        params.push(RW, w)?;
        params.push(RB, RealTensor::zeros(&[entries]))?;
        Ok(Self {
            history_len,
            kernel,
            params,
        })
    }

    /// Restores a model; the kernel is stored alongside as `dl.kernel`.
    pub fn from_params(mut params: ParamSet) -> Result<Self> {
        let kernel = params
            .remove("dl.kernel")
            .map(|t| t.data()[0] as usize)
            .unwrap_or(DLINEAR_DEFAULT_KERNEL);
        let w = params.require(TW)?;
        if w.rank() != 2 {
            return shape_err(format!("{TW} has shape {:?}", w.shape()));
        }
        let (e, l) = (w.shape()[0], w.shape()[1]);
        let template = Self::init(e, l, kernel)?;
        for (name, t) in template.params.iter() {
            if params.require(name)?.shape() != t.shape() {
                return shape_err(format!("{name}: expected {:?}", t.shape()));
            }
        }
        Ok(Self {
            history_len: l,
            kernel,
            params,
        })
    }

    /// Parameters plus the kernel size, ready for a checkpoint.
    pub fn to_params(&self) -> ParamSet {
        let mut p = self.params.clone();
        p.push("dl.kernel", RealTensor::scalar(self.kernel as f64))
            .expect("name is free");
        p
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn entries(&self) -> usize {
        self.params.tensors()[1].len()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// `2·(L + 1)` per entry.
    pub fn count_for(entries: usize, history_len: usize) -> usize {
        entries * 2 * (history_len + 1)
    }

    /// Trend and remainder tables `[entries, L]` for one history.
    fn features(&self, history: &[RealTensor]) -> (Vec<f64>, Vec<f64>) {
        let (e, l) = (self.entries(), self.history_len);
        let mut trend = vec![0.0; e * l];
        let mut rem = vec![0.0; e * l];
        let mut series = vec![0.0; l];
        for i in 0..e {
            for (t, f) in history.iter().enumerate() {
                series[t] = f.data()[i];
            }
            let row = &mut trend[i * l..(i + 1) * l];
            trend_into(&series, self.kernel, row);
            for t in 0..l {
                rem[i * l + t] = series[t] - row[t];
            }
        }
        (trend, rem)
    }

    fn apply(&self, trend: &[f64], rem: &[f64]) -> Vec<f64> {
        let (e, l) = (self.entries(), self.history_len);
        let p = self.params.tensors();
        let (tw, tb, rw, rb) = (p[0].data(), p[1].data(), p[2].data(), p[3].data());
        (0..e)
            .map(|i| {
                let r = i * l..(i + 1) * l;
                let a: f64 = tw[r.clone()].iter().zip(&trend[r.clone()]).map(|(w, x)| w * x).sum();
                let b: f64 = rw[r.clone()].iter().zip(&rem[r]).map(|(w, x)| w * x).sum();
                a + tb[i] + b + rb[i]
            })
            .collect()
    }

    /// Fits by MSE/Adam with hand-derived gradients.
    pub fn fit(
        frames: &[RealTensor],
        train: &[SampleWindow],
        val: &[SampleWindow],
        kernel: usize,
        cfg: &FitConfig,
        observer: impl FnMut(&EpochStats),
    ) -> Result<(Self, TrainReport)> {
        check_windows(frames.len(), train, cfg.history_len)?;
        check_windows(frames.len(), val, cfg.history_len)?;
        let entries = frames.first().map_or(0, RealTensor::len);
        let mut model = Self::init(entries, cfg.history_len, kernel)?;
        let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params)?;
        let settings = LoopSettings {
            batch: cfg.batch,
            max_epochs: cfg.max_epochs,
            patience: cfg.patience,
            seed: cfg.seed,
        };
        let report = early_stopping(
            &mut model,
            &settings,
            train,
            val,
            |m, chunk| {
                let (e, l) = (m.entries(), m.history_len);
                let mut grads: Vec<RealTensor> =
                    m.params.tensors().iter().map(|t| RealTensor::zeros(t.shape())).collect();
                let scale = 2.0 / (chunk.len() * e) as f64;
                let mut loss = 0.0;
                for w in chunk {
                    let (trend, rem) = m.features(w.history(frames));
                    let pred = m.apply(&trend, &rem);
                    let target = frames[w.t_index].data();
                    for i in 0..e {
                        let diff = pred[i] - target[i];
                        loss += diff * diff;
                        let d = scale * diff;
                        let r = i * l..(i + 1) * l;
                        for (gw, x) in grads[0].data_mut()[r.clone()].iter_mut().zip(&trend[r.clone()]) {
                            *gw += d * x;
                        }
                        grads[1].data_mut()[i] += d;
                        for (gw, x) in grads[2].data_mut()[r.clone()].iter_mut().zip(&rem[r]) {
                            *gw += d * x;
                        }
                        grads[3].data_mut()[i] += d;
                    }
                }
                let loss = loss / (chunk.len() * e) as f64;
                if loss.is_finite() {
                    adam.step(&mut m.params, &grads)?;
                }
                Ok(loss)
            },
            |m, windows| {
                let mut total = 0.0;
                for w in windows {
                    let p = m.predict(w.history(frames))?;
                    let t = &frames[w.t_index];
                    let se: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
                    total += se / t.len() as f64;
                }
                Ok(total / windows.len() as f64)
            },
            observer,
        )?;
        Ok((model, report))
    }
}

impl Predictor for DLinear {
    fn name(&self) -> &str {
        "dlinear"
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        let h = tail(history, self.history_len)?;
        if h[0].len() != self.entries() {
            return shape_err(format!("frame has {} entries, model has {}", h[0].len(), self.entries()));
        }
        let (trend, rem) = self.features(h);
        Ok(RealTensor::from_parts(h[0].shape().to_vec(), self.apply(&trend, &rem)))
    }

    fn param_count(&self) -> usize {
        self.params.element_count()
    }
}
