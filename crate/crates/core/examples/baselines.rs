//! Fits the two trainable baselines and scores every baseline on the same
//! test windows.
//!
//! Run with `cargo run --release --example baselines`.

use otfs_predict::baselines::{
    DLinear, FitConfig, LinearTrend, MovingAverage, Predictor, RepeatLast, TimeLinear, DLINEAR_DEFAULT_KERNEL,
};
use otfs_predict::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};
use otfs_predict::dataset::{DatasetSplit, DEFAULT_SPLIT};
use otfs_predict::harness::evaluate;
use otfs_predict::otfs::OtfsDims;

fn main() -> otfs_predict::Result<()> {
    let dims = OtfsDims::new(16, 4)?;
    let profile = MobilityProfile::high_speed_rail().with_speed(300.0)?;
    let seq = generate_sequence(dims, &profile, &PowerDelayProfile::eva(), 300, 5)?;
    let split = DatasetSplit::chronological(&seq, 10, 1, 1, DEFAULT_SPLIT)?.normalize()?;
    let fit = FitConfig {
        max_epochs: 10,
        lr: 1e-2,
        ..FitConfig::default()
    };
    let (tl, _) = TimeLinear::fit(split.frames(), &split.train, &split.val, TimeLinear::DEFAULT_HIDDEN, &fit, |_| {})?;
    let (dl, _) = DLinear::fit(split.frames(), &split.train, &split.val, DLINEAR_DEFAULT_KERNEL, &fit, |_| {})?;

    let models: Vec<Box<dyn Predictor>> = vec![
        Box::new(RepeatLast),
        Box::new(LinearTrend),
        Box::new(MovingAverage::default()),
        Box::new(tl),
        Box::new(dl),
    ];
    println!("{:<16} {:>10} {:>11} {:>11}", "predictor", "params", "RMSE", "MAE");
    for m in &models {
        let r = evaluate(m, &split, 10, 1)?;
        println!("{:<16} {:>10} {:>11.4e} {:>11.4e}", r.predictor, r.params, r.rmse, r.mae);
    }
    Ok(())
}
