//! Parameter counts and single-sample inference time of an untrained
//! LDformer and the stateless baselines.
//!
//! Run with `cargo run --release --example bench`.

use otfs_predict::baselines::{LinearTrend, MovingAverage, Predictor, RepeatLast};
use otfs_predict::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};
use otfs_predict::dataset::{DatasetSplit, DEFAULT_SPLIT};
use otfs_predict::harness::{bench, write_csv};
use otfs_predict::ldformer::{Ldformer, LdformerConfig};

fn main() -> otfs_predict::Result<()> {
    let cfg = LdformerConfig::desk();
    let seq = generate_sequence(cfg.dims, &MobilityProfile::high_speed_rail(), &PowerDelayProfile::eva(), 80, 4)?;
    let split = DatasetSplit::chronological(&seq, 10, 1, 1, DEFAULT_SPLIT)?.normalize()?;
    let ldformer = Ldformer::init(cfg)?;
    let models: [&dyn Predictor; 4] = [&RepeatLast, &LinearTrend, &MovingAverage::default(), &ldformer];
    let rows = models
        .iter()
        .map(|m| bench(*m, &split, 10, 10, 100))
        .collect::<otfs_predict::Result<Vec<_>>>()?;
    write_csv(std::io::stdout().lock(), &rows)?;

    let full = LdformerConfig::full_scale();
    println!("# full-scale configuration: {} parameters", full.parameter_count());
    Ok(())
}
