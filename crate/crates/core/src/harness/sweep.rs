use super::eval::{evaluate, evaluate_windows};
use super::metrics::MetricsReport;
use crate::baselines::Predictor;
use crate::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};
use crate::dataset::{DatasetSplit, Region};
use crate::error::{arg_err, Result};
use crate::otfs::OtfsDims;

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    History,
    Horizon,
    SpeedKmh,
}

/// Reports of every predictor at every axis point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    /// `reports[i]` holds one report per predictor at `points[i]`.
    pub reports: Vec<Vec<MetricsReport>>,
}

impl SweepResult {
    fn new(axis: SweepAxis, points: Vec<f64>, reports: Vec<Vec<MetricsReport>>) -> Self {
        debug_assert_eq!(points.len(), reports.len());
        Self { axis, points, reports }
    }

    /// All reports in axis order, predictors in the order given.
    pub fn rows(&self) -> impl Iterator<Item = &MetricsReport> {
        self.reports.iter().flatten()
    }

    /// Reports of one predictor along the axis.
    pub fn series(&self, predictor: &str) -> Vec<&MetricsReport> {
        self.rows().filter(|r| r.predictor == predictor).collect()
    }
}

fn check_axis<T: PartialOrd + Copy + std::fmt::Debug>(points: &[T]) -> Result<()> {
    if points.is_empty() {
        return arg_err("sweep needs at least one point");
    }
    if points.windows(2).any(|p| p[0] >= p[1]) {
        return arg_err(format!("sweep points must be strictly increasing, got {points:?}"));
    }
    Ok(())
}

fn check_predictors(predictors: &[&dyn Predictor]) -> Result<()> {
    if predictors.is_empty() {
        return arg_err("sweep needs at least one predictor");
    }
    Ok(())
}

/// One-step error for each history length. Every point scores the same
/// targets: windows are cut at the longest length and then truncated, so
/// only the amount of visible history changes.
pub fn sweep_history(
    predictors: &[&dyn Predictor],
    split: &DatasetSplit,
    lengths: &[usize],
) -> Result<SweepResult> {
    check_axis(lengths)?;
    check_predictors(predictors)?;
    if lengths[0] == 0 {
        return arg_err("history lengths must be positive");
    }
    let longest = *lengths.last().expect("non-empty");
    let base = split.windows(Region::Test, longest, 1);
    let mut reports = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let windows: Vec<_> = base.iter().map(|w| w.with_history(len)).collect();
        let row = predictors
            .iter()
            .map(|p| evaluate_windows(*p, split, &windows, 1))
            .collect::<Result<Vec<_>>>()?;
        reports.push(row);
    }
    let points = lengths.iter().map(|&l| l as f64).collect();
    Ok(SweepResult::new(SweepAxis::History, points, reports))
}

/// Error of the `h`-th autoregressive forecast for each horizon `h`.
/// Each point is a plain [`evaluate`] call, so `h = 1` matches it exactly.
pub fn sweep_horizon(
    predictors: &[&dyn Predictor],
    split: &DatasetSplit,
    history: usize,
    horizons: &[usize],
) -> Result<SweepResult> {
    check_axis(horizons)?;
    check_predictors(predictors)?;
    let reports = horizons
        .iter()
        .map(|&h| predictors.iter().map(|p| evaluate(*p, split, history, h)).collect())
        .collect::<Result<Vec<_>>>()?;
    let points = horizons.iter().map(|&h| h as f64).collect();
    Ok(SweepResult::new(SweepAxis::Horizon, points, reports))
}

/// Where fresh test sequences for a speed sweep come from.
#[derive(Debug, Clone)]
pub struct SpeedSweepSpec {
    pub dims: OtfsDims,
    /// Carrier and numerology; the speed is replaced per point.
    pub profile: MobilityProfile,
    pub pdp: PowerDelayProfile,
    pub frames: usize,
    pub history: usize,
    /// Base seed; point `i` uses [`speed_seed`]`(seed, i)`.
    pub seed: u64,
    /// Scale the predictors were trained under.
    pub norm_scale: f64,
}

/// Seed of the `index`-th speed point. Distinct for distinct indices and
/// never equal to `base`, so no test set reuses the training draw.
pub fn speed_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(index as u64 + 1))
}

/// Evaluates already trained predictors on fresh sequences generated at
/// each speed, normalized with the training scale.
pub fn sweep_speed(
    predictors: &[&dyn Predictor],
    spec: &SpeedSweepSpec,
    speeds_kmh: &[f64],
) -> Result<SweepResult> {
    check_axis(speeds_kmh)?;
    check_predictors(predictors)?;
    let mut reports = Vec::with_capacity(speeds_kmh.len());
    for (i, &speed) in speeds_kmh.iter().enumerate() {
        let profile = spec.profile.with_speed(speed)?;
        let seq = generate_sequence(spec.dims, &profile, &spec.pdp, spec.frames, speed_seed(spec.seed, i))?;
        let split = DatasetSplit::test_only(&seq, spec.history, 1, spec.norm_scale)?;
        let row = predictors
            .iter()
            .map(|p| evaluate(*p, &split, spec.history, 1))
            .collect::<Result<Vec<_>>>()?;
        reports.push(row);
    }
    Ok(SweepResult::new(SweepAxis::SpeedKmh, speeds_kmh.to_vec(), reports))
}
