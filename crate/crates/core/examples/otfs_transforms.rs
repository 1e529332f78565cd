//! DD/TF grid transforms and the time-domain to DD channel conversion.
//!
//! Run with `cargo run --example otfs_transforms`.

use num_complex::Complex64;
use otfs_predict::otfs::{
    heisenberg_transmit, isfft, sfft, td_to_dd_channel, wigner_receive, ComplexMatrix, OtfsDims,
};

fn main() -> otfs_predict::Result<()> {
    let dims = OtfsDims::new(4, 2)?;

    // One symbol at delay 0, Doppler 0 spreads evenly over the TF grid.
    let mut x_dd = ComplexMatrix::zeros(dims.m(), dims.n());
    x_dd.set(0, 0, Complex64::new(1.0, 0.0));
    let x_tf = isfft(&x_dd, dims)?;
    println!("TF grid of a DD delta: every entry {:.4}", x_tf.get(1, 1));
    println!("round-trip error {:.2e}", sfft(&x_tf, dims)?.max_abs_diff(&x_dd));

    // Transmit and receive through a two-path circulant channel.
    let s = dims.side();
    let h_td = ComplexMatrix::from_fn(s, s, |p, q| match (p + s - q) % s {
        0 => Complex64::new(0.8, 0.1),
        1 => Complex64::new(0.0, 0.5),
        _ => Complex64::new(0.0, 0.0),
    });
    let h_dd = td_to_dd_channel(&h_td, dims)?;
    println!(
        "Frobenius norms: TD {:.6}, DD {:.6}",
        h_td.frobenius_norm(),
        h_dd.frobenius_norm()
    );

    let x_vec = ComplexMatrix::column((0..s).map(|i| Complex64::new(i as f64, 1.0)).collect());
    let through_time = wigner_receive(&h_td.matmul(&heisenberg_transmit(&x_vec, dims)?)?, dims)?;
    let direct = h_dd.matrix().matmul(&x_vec)?;
    println!("DD pathway mismatch {:.2e}", through_time.max_abs_diff(&direct));
    Ok(())
}
