//! Builds a small conv + attention graph, back-propagates, and compares
//! one gradient against central differences.
//!
//! Run with `cargo run --example autodiff_gradcheck`.

use otfs_predict::autodiff::{AttentionMask, Graph, Var};
use otfs_predict::RealTensor;

fn loss(g: &mut Graph, x: Var, w: Var) -> otfs_predict::Result<Var> {
    let h = g.conv2d(x, w, None, 1, 1)?;
    let h = g.leaky_relu(h, 0.01);
    let z = g.reshape(h, &[1, 2, 8])?;
    let mask = AttentionMask::causal(2);
    let a = g.attention(z, z, z, 2, Some(&mask))?;
    Ok(g.sum(a))
}

fn main() -> otfs_predict::Result<()> {
    let x = RealTensor::new(vec![2, 1, 2, 4], (0..16).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let w = RealTensor::new(vec![1, 1, 3, 3], (0..9).map(|i| 0.1 * i as f64 - 0.4).collect())?;

    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let wv = g.param(w.clone());
    let l = loss(&mut g, xv, wv)?;
    g.backward(l)?;
    let analytic = g.grad(wv);

    let eps = 1e-6;
    let value_at = |w: RealTensor| -> otfs_predict::Result<f64> {
        let mut g = Graph::new();
        let (xv, wv) = (g.constant(x.clone()), g.param(w));
        let l = loss(&mut g, xv, wv)?;
        Ok(g.value(l).data()[0])
    };
    for j in [0, 4, 8] {
        let (mut up, mut down) = (w.clone(), w.clone());
        up.data_mut()[j] += eps;
        down.data_mut()[j] -= eps;
        let numeric = (value_at(up)? - value_at(down)?) / (2.0 * eps);
        println!("dL/dw[{j}]: backprop {:+.8}  finite difference {numeric:+.8}", analytic.data()[j]);
    }
    Ok(())
}
