//! Simulates an EVA fading channel at high-speed-rail mobility and shows
//! how quickly consecutive DD frames decorrelate at several speeds.
//!
//! Run with `cargo run --release --example channel_simulation`.

use otfs_predict::channel::{frame_duration, generate_sequence, max_doppler, MobilityProfile, PowerDelayProfile};
use otfs_predict::otfs::OtfsDims;

fn frame_correlation(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    let dot: num_complex::Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    dot.norm() / (na * nb)
}

fn main() -> otfs_predict::Result<()> {
    let dims = OtfsDims::new(16, 4)?;
    let pdp = PowerDelayProfile::eva();
    for speed in [0.0, 100.0, 300.0, 500.0] {
        let profile = MobilityProfile::high_speed_rail().with_speed(speed)?;
        let seq = generate_sequence(dims, &profile, &pdp, 60, 7)?;
        let frames = seq.frames();
        let corr: f64 = frames
            .windows(2)
            .map(|w| frame_correlation(w[0].matrix().as_slice(), w[1].matrix().as_slice()))
            .sum::<f64>()
            / (frames.len() - 1) as f64;
        println!(
            "{speed:>5} km/h  f_d {:>7.1} Hz  f_d*T {:.3}  mean |corr(H_t, H_t+1)| {corr:.3}",
            max_doppler(&profile),
            max_doppler(&profile) * frame_duration(dims, &profile),
        );
    }
    Ok(())
}
