use crate::error::{arg_err, shape_err, Result};
use crate::otfs::OtfsDims;
use crate::tensor::RealTensor;

fn check(preds: &[RealTensor], truths: &[RealTensor], dims: OtfsDims) -> Result<usize> {
    if preds.is_empty() {
        return arg_err("no samples");
    }
    if preds.len() != truths.len() {
        return arg_err(format!("{} predictions for {} truths", preds.len(), truths.len()));
    }
    let s = dims.side();
    for t in preds.iter().chain(truths) {
        if t.shape() != [2, s, s] {
            return shape_err(format!("sample {:?}, expected [2, {s}, {s}]", t.shape()));
        }
    }
    Ok(s * s)
}

/// `(1/K) Σ (1/MN) ‖Ĥ − H‖_F` over complex frames stored as real/imaginary
/// planes. This averages scaled Frobenius norms; there is no outer root.
pub fn compute_rmse(preds: &[RealTensor], truths: &[RealTensor], dims: OtfsDims) -> Result<f64> {
    let plane = check(preds, truths, dims)?;
    let s = dims.side() as f64;
    let total: f64 = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            let sq: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            debug_assert_eq!(p.len(), 2 * plane);
            sq.sqrt() / s
        })
        .sum();
    Ok(total / preds.len() as f64)
}

/// `(1/K) Σ (1/(MN)²) ‖vec(Ĥ − H)‖₁` with complex moduli.
pub fn compute_mae(preds: &[RealTensor], truths: &[RealTensor], dims: OtfsDims) -> Result<f64> {
    let plane = check(preds, truths, dims)?;
    let total: f64 = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            let (p, t) = (p.data(), t.data());
            let l1: f64 = (0..plane)
                .map(|i| (p[i] - t[i]).hypot(p[plane + i] - t[plane + i]))
                .sum();
            l1 / plane as f64
        })
        .sum();
    Ok(total / preds.len() as f64)
}

/// Accuracy and cost of one predictor at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub predictor: String,
    pub horizon: usize,
    pub history: usize,
    /// Number of evaluated samples `K`.
    pub samples: usize,
    pub rmse: f64,
    pub mae: f64,
    /// Mean wall-clock inference time per sample.
    pub infer_ms: f64,
    /// Wall-clock inference time over all samples.
    pub total_ms: f64,
    pub params: usize,
    /// Smallest target frame index evaluated; never below the test region.
    pub first_target: usize,
    /// Start of the test region in the frame store.
    pub test_start: usize,
}
