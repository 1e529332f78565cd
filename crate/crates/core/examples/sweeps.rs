//! History, horizon and speed sweeps over the stateless baselines, written
//! as metrics CSV to stdout.
//!
//! Run with `cargo run --release --example sweeps`.

use otfs_predict::baselines::{LinearTrend, MovingAverage, Predictor, RepeatLast};
use otfs_predict::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};
use otfs_predict::dataset::{DatasetSplit, DEFAULT_SPLIT};
use otfs_predict::harness::{sweep_history, sweep_horizon, sweep_speed, write_csv, SpeedSweepSpec};
use otfs_predict::otfs::OtfsDims;

fn main() -> otfs_predict::Result<()> {
    let dims = OtfsDims::new(16, 4)?;
    let profile = MobilityProfile::high_speed_rail().with_speed(100.0)?;
    let pdp = PowerDelayProfile::eva();
    let seq = generate_sequence(dims, &profile, &pdp, 200, 2)?;
    let split = DatasetSplit::chronological(&seq, 10, 1, 1, DEFAULT_SPLIT)?.normalize()?;
    let (rl, lt, ma) = (RepeatLast, LinearTrend, MovingAverage::new(Some(3))?);
    let predictors: [&dyn Predictor; 3] = [&rl, &lt, &ma];

    let history = sweep_history(&predictors, &split, &[2, 4, 8])?;
    let horizon = sweep_horizon(&predictors, &split, 10, &[1, 2, 3])?;
    let spec = SpeedSweepSpec {
        dims,
        profile,
        pdp,
        frames: 60,
        history: 10,
        seed: 2,
        norm_scale: split.norm_scale(),
    };
    let speed = sweep_speed(&predictors, &spec, &[50.0, 100.0, 300.0])?;

    let out = std::io::stdout();
    for (label, sweep) in [("history", &history), ("horizon", &horizon), ("speed", &speed)] {
        println!("# {label} sweep over {:?}", sweep.points);
        write_csv(out.lock(), sweep.rows())?;
    }
    Ok(())
}
