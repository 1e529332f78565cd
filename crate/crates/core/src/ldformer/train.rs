use super::config::LdformerConfig;
use super::model::{graph_forward, Ldformer};
use crate::autodiff::{AdamConfig, AdamState, Graph};
use crate::dataset::{DatasetSplit, Region, SampleWindow};
use crate::error::{Error, Result};
use crate::fit::{check_windows, early_stopping, EpochStats, LoopSettings, TrainReport};
use crate::tensor::RealTensor;

/// Trains on the split's training windows with early stopping on its
/// validation windows. Windows are `config.history_len` long.
pub fn train(split: &DatasetSplit, config: LdformerConfig) -> Result<(Ldformer, TrainReport)> {
    train_with_observer(split, config, |_| {})
}

pub fn train_with_observer(
    split: &DatasetSplit,
    config: LdformerConfig,
    observer: impl FnMut(&EpochStats),
) -> Result<(Ldformer, TrainReport)> {
    let l = config.history_len;
    let train = split.windows(Region::Train, l, 1);
    let val = split.windows(Region::Val, l, 1);
    train_windows(split.frames(), &train, &val, Ldformer::init(config)?, observer)
}

/// Input and right-shifted target `[B·L, 2, S, S]` for a batch of windows.
fn batch_tensors(frames: &[RealTensor], windows: &[SampleWindow]) -> (RealTensor, RealTensor) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for w in windows {
        let h = w.history_range();
        x.extend(&frames[h.clone()]);
        y.extend(&frames[h.start + 1..=h.end]);
    }
    let stack = |v: &[&RealTensor]| RealTensor::stack(v).expect("equal frame shapes");
    (stack(&x), stack(&y))
}

fn batch_graph(model: &Ldformer, frames: &[RealTensor], windows: &[SampleWindow]) -> Result<(Graph, crate::autodiff::BoundParams, crate::autodiff::Var)> {
    let cfg = model.config();
    let (x, y) = batch_tensors(frames, windows);
    let mut g = Graph::new();
    let bound = model.params().register(&mut g);
    let xv = g.constant(x);
    let out = graph_forward(&mut g, &bound, cfg, xv, windows.len(), cfg.history_len)?;
    let yv = g.constant(y);
    let loss = g.mse_loss(out, yv)?;
    Ok((g, bound, loss))
}

/// Mean dense loss over `windows`, computed batch by batch.
pub(crate) fn dense_loss(model: &Ldformer, frames: &[RealTensor], windows: &[SampleWindow]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in windows.chunks(model.config().batch) {
        let (g, _, loss) = batch_graph(model, frames, chunk)?;
        total += g.value(loss).data()[0] * chunk.len() as f64;
    }
    Ok(total / windows.len().max(1) as f64)
}

/// Core loop: shuffled minibatches, Adam, early stopping with the best
/// validation weights restored. An empty validation set tracks training
/// loss instead. Training minimizes the dense right-shifted loss over all
/// `L` output positions.
pub fn train_windows(
    frames: &[RealTensor],
    train: &[SampleWindow],
    val: &[SampleWindow],
    mut model: Ldformer,
    observer: impl FnMut(&EpochStats),
) -> Result<(Ldformer, TrainReport)> {
    let cfg = model.config().clone();
    check_windows(frames.len(), train, cfg.history_len)?;
    check_windows(frames.len(), val, cfg.history_len)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), model.params())?;
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
            let (mut g, bound, loss) = batch_graph(m, frames, chunk)?;
            let value = g.value(loss).data()[0];
            if !value.is_finite() {
                return Ok(value);
            }
            g.backward(loss)?;
            adam.step(m.params_mut(), &bound.grads(&g))?;
            if !m.params().is_finite() {
                return Err(Error::Numerical("parameters became non-finite".into()));
            }
            Ok(value)
        },
        |m, windows| dense_loss(m, frames, windows),
        observer,
    )?;
    Ok((model, report))
}
