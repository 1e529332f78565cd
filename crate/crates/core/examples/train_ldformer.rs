//! Trains a small LDformer on a short simulated sequence, saves it with
//! its normalization scale, and reloads it for a forecast.
//!
//! Run with `cargo run --release --example train_ldformer`.

use otfs_predict::baselines::Predictor;
use otfs_predict::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};
use otfs_predict::dataset::{DatasetSplit, DEFAULT_SPLIT};
use otfs_predict::harness::{evaluate, load_predictor, save_predictor, AnyPredictor};
use otfs_predict::ldformer::{train_with_observer, LdformerConfig};
use otfs_predict::otfs::OtfsDims;

fn main() -> otfs_predict::Result<()> {
    let cfg = LdformerConfig {
        max_epochs: 3,
        ..LdformerConfig::desk()
    };
    let dims: OtfsDims = cfg.dims;
    println!("{} parameters ({:?})", cfg.parameter_count(), cfg.param_breakdown());

    let seq = generate_sequence(dims, &MobilityProfile::high_speed_rail(), &PowerDelayProfile::eva(), 200, 11)?;
    let split = DatasetSplit::chronological(&seq, cfg.history_len, 1, 1, DEFAULT_SPLIT)?.normalize()?;
    let (model, report) = train_with_observer(&split, cfg, |e| {
        println!("epoch {}  train {:.3e}  val {:.3e}", e.epoch, e.train_loss, e.val_loss)
    })?;
    println!("kept epoch {} (val {:.3e})", report.best_epoch, report.best_val);

    let path = std::env::temp_dir().join("ldformer_example.ckpt");
    save_predictor(&path, &AnyPredictor::Ldformer(model), split.norm_scale())?;
    let (reloaded, scale) = load_predictor(&path)?;
    std::fs::remove_file(&path)?;
    let r = evaluate(&reloaded, &split, 10, 1)?;
    println!(
        "reloaded {} (scale {scale:.4}): test RMSE {:.4e}, MAE {:.4e} over {} windows",
        reloaded.name(),
        r.rmse,
        r.mae,
        r.samples
    );
    Ok(())
}
