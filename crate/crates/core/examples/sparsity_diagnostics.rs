//! Energy concentration and frame-to-frame stability of the DD spreading
//! grid versus the TF response.
//!
//! Run with `cargo run --release --example sparsity_diagnostics`.

use otfs_predict::channel::{generate_sequence, sparsity_report, MobilityProfile, PowerDelayProfile};
use otfs_predict::otfs::OtfsDims;

fn main() -> otfs_predict::Result<()> {
    let dims = OtfsDims::new(16, 4)?;
    let seq = generate_sequence(dims, &MobilityProfile::high_speed_rail(), &PowerDelayProfile::eva(), 100, 1)?;
    let r = sparsity_report(&seq)?;
    println!("frames analysed          {}", r.frame_count);
    println!("energy in top 1% bins    {:.3}", r.mean_top1);
    println!("energy in top 5% bins    {:.3}", r.mean_top5);
    println!("energy in top 10% bins   {:.3}", r.mean_top10);
    println!("consecutive DD corr      {:.3}", r.mean_dd_correlation);
    println!("consecutive TF corr      {:.3}", r.mean_tf_correlation);
    Ok(())
}
