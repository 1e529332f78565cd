//! Writes a simulated sequence to disk, reads it back, and cuts it into a
//! normalized chronological split of history/target windows.
//!
//! Run with `cargo run --release --example dataset_io`.

use otfs_predict::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};
use otfs_predict::dataset::{encode_dataset, load_dataset, save_dataset, DatasetSplit, DEFAULT_SPLIT};
use otfs_predict::otfs::OtfsDims;

fn main() -> otfs_predict::Result<()> {
    let dims = OtfsDims::new(16, 4)?;
    let seq = generate_sequence(dims, &MobilityProfile::high_speed_rail(), &PowerDelayProfile::eva(), 120, 3)?;

    let path = std::env::temp_dir().join("otfs_example.dataset");
    save_dataset(&path, &seq)?;
    let back = load_dataset(&path)?;
    // Entries are stored in single precision, so the first write rounds;
    // from then on the file reproduces itself exactly.
    let worst = seq
        .frames()
        .iter()
        .zip(back.frames())
        .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
        .fold(0.0, f64::max);
    println!(
        "{} frames read back; max rounding {worst:.1e}; re-encoding identical: {}",
        back.len(),
        encode_dataset(&back) == std::fs::read(&path)?
    );
    std::fs::remove_file(&path)?;

    let split = DatasetSplit::chronological(&back, 10, 1, 1, DEFAULT_SPLIT)?.normalize()?;
    println!(
        "windows: {} train, {} val, {} test; scale {:.4}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        split.norm_scale()
    );
    let w = split.test[0];
    let x = w.history_tensor(split.frames());
    println!("first test window: target frame {}, history tensor {:?}", w.t_index, x.shape());
    Ok(())
}
