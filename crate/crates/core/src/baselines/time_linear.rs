use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tail, FitConfig, Predictor};
use crate::autodiff::{feed_forward, AdamConfig, AdamState, Graph, ParamSet};
use crate::dataset::SampleWindow;
use crate::error::{arg_err, shape_err, Result};
use crate::fit::{check_windows, early_stopping, EpochStats, LoopSettings, TrainReport};
use crate::tensor::RealTensor;

const SLOPE: f64 = 0.01;

/// Per-entry forecaster: every real scalar of the frame sees its own
/// `L`-long history through one shared `L → hidden → 1` MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLinear {
    history_len: usize,
    hidden: usize,
    params: ParamSet,
}

impl TimeLinear {
    pub const DEFAULT_HIDDEN: usize = 64;

    pub fn init(history_len: usize, hidden: usize, seed: u64) -> Result<Self> {
        if history_len == 0 || hidden == 0 {
            return arg_err("history_len and hidden must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |rows: usize, cols: usize| {
            let bound = (3.0 / rows as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
            RealTensor::from_parts(vec![rows, cols], data)
        };
        let mut params = ParamSet::new();
        params.push("tl.w1", uniform(history_len, hidden))?;
        params.push("tl.b1", RealTensor::zeros(&[hidden]))?;
        params.push("tl.w2", uniform(hidden, 1))?;
        params.push("tl.b2", RealTensor::zeros(&[1]))?;
        Ok(Self {
            history_len,
            hidden,
            params,
        })
    }

    pub fn from_params(params: ParamSet) -> Result<Self> {
        let w1 = params.require("tl.w1")?;
        if w1.rank() != 2 {
            return shape_err(format!("tl.w1 has shape {:?}", w1.shape()));
        }
        let (l, h) = (w1.shape()[0], w1.shape()[1]);
        let template = Self::init(l, h, 0)?;
        for (name, t) in template.params.iter() {
            if params.require(name)?.shape() != t.shape() {
                return shape_err(format!("{name}: expected {:?}", t.shape()));
            }
        }
        Ok(Self {
            history_len: l,
            hidden: h,
            params,
        })
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// `(L·hidden + hidden) + (hidden + 1)`.
    pub fn count_for(history_len: usize, hidden: usize) -> usize {
        history_len * hidden + hidden + hidden + 1
    }

    /// Fits by MSE/Adam on `train`, early-stopping on `val`.
    pub fn fit(
        frames: &[RealTensor],
        train: &[SampleWindow],
        val: &[SampleWindow],
        hidden: usize,
        cfg: &FitConfig,
        observer: impl FnMut(&EpochStats),
    ) -> Result<(Self, TrainReport)> {
        check_windows(frames.len(), train, cfg.history_len)?;
        check_windows(frames.len(), val, cfg.history_len)?;
        let mut model = Self::init(cfg.history_len, hidden, cfg.seed)?;
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
                let (x, y) = entry_rows(frames, chunk, m.history_len);
                let mut g = Graph::new();
                let b = m.params.register(&mut g);
                let out = m.graph(&mut g, &b, x)?;
                let yv = g.constant(y);
                let loss = g.mse_loss(out, yv)?;
                let value = g.value(loss).data()[0];
                if value.is_finite() {
                    g.backward(loss)?;
                    adam.step(&mut m.params, &b.grads(&g))?;
                }
                Ok(value)
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

    fn graph(&self, g: &mut Graph, b: &crate::autodiff::BoundParams, x: RealTensor) -> Result<crate::autodiff::Var> {
        let xv = g.constant(x);
        feed_forward(g, xv, b.var("tl.w1")?, b.var("tl.b1")?, b.var("tl.w2")?, b.var("tl.b2")?, SLOPE)
    }
}

/// Rows `[entries, L]` of per-entry histories and `[entries, 1]` targets
/// for a batch of windows.
fn entry_rows(frames: &[RealTensor], windows: &[SampleWindow], l: usize) -> (RealTensor, RealTensor) {
    let e = frames[0].len();
    let mut x = Vec::with_capacity(windows.len() * e * l);
    let mut y = Vec::with_capacity(windows.len() * e);
    for w in windows {
        let h = w.history(frames);
        for i in 0..e {
            x.extend(h.iter().map(|f| f.data()[i]));
        }
        y.extend_from_slice(frames[w.t_index].data());
    }
    let rows = windows.len() * e;
    (RealTensor::from_parts(vec![rows, l], x), RealTensor::from_parts(vec![rows, 1], y))
}

impl Predictor for TimeLinear {
    fn name(&self) -> &str {
        "time-linear"
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        let h = tail(history, self.history_len)?;
        let e = h[0].len();
        let l = self.history_len;
        let mut x = Vec::with_capacity(e * l);
        for i in 0..e {
            x.extend(h.iter().map(|f| f.data()[i]));
        }
        let p = |n: &str| self.params.get(n).expect("layout checked").data();
        use crate::autodiff::kernels::{leaky_relu, linear_forward};
        let hid = leaky_relu(&linear_forward(&x, e, l, p("tl.w1"), self.hidden, Some(p("tl.b1"))), SLOPE);
        let out = linear_forward(&hid, e, self.hidden, p("tl.w2"), 1, Some(p("tl.b2")));
        Ok(RealTensor::from_parts(h[0].shape().to_vec(), out))
    }

    fn param_count(&self) -> usize {
        self.params.element_count()
    }
}
