//! Delay-Doppler sparsity and frame-to-frame stability diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::sequence::ChannelSequence;
use crate::error::{arg_err, Result};
use crate::otfs::{dd_to_td_channel, sfft, ComplexMatrix, DdChannelMatrix};
use crate::tensor::RealTensor;

/// TF-domain response `H[m, n]` (subcarrier `m`, symbol `n`) of one frame.
///
/// The per-delay gain trajectories are read off the cyclic diagonals of the
/// underlying time-domain matrix and sampled at the centre of each symbol.
pub fn tf_response(frame: &DdChannelMatrix) -> ComplexMatrix {
    let dims = frame.dims();
    let (m, n, s) = (dims.m(), dims.n(), dims.side());
    let h_td = dd_to_td_channel(frame);

    let mut out = ComplexMatrix::zeros(m, n);
    for sym in 0..n {
        let p = sym * m + m / 2;
        for delay in 0..s {
            let g = h_td.get(p, (p + s - delay) % s);
            if g.norm_sqr() < 1e-30 {
                continue;
            }
            for sc in 0..m {
                let phase = -2.0 * PI * ((sc * delay) % m) as f64 / m as f64;
                let cur = out.get(sc, sym);
                out.set(sc, sym, cur + g * Complex64::from_polar(1.0, phase));
            }
        }
    }
    out
}

/// Magnitude of the DD spreading function of `frame`, an `M x N` grid.
///
/// Scaled by `1/√(MN)` so the grid energy equals the mean (over symbols)
/// power of the combined delay taps.
pub fn dd_spread_grid(frame: &DdChannelMatrix) -> RealTensor {
    let dims = frame.dims();
    let tf = tf_response(frame);
    let dd = sfft(&tf, dims).expect("tf_response has M x N shape");
    let scale = 1.0 / (dims.side() as f64).sqrt();
    let data = dd.as_slice().iter().map(|z| z.norm() * scale).collect();
    RealTensor::from_parts(vec![dims.m(), dims.n()], data)
}

/// Fraction of total energy held by the `ceil(fraction·bins)` strongest bins.
pub fn top_energy_fraction(magnitudes: &[f64], fraction: f64) -> f64 {
    let mut energy: Vec<f64> = magnitudes.iter().map(|v| v * v).collect();
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    energy.sort_by(|a, b| b.total_cmp(a));
    let k = ((fraction * energy.len() as f64).ceil() as usize).clamp(1, energy.len());
    energy[..k].iter().sum::<f64>() / total
}

/// Zero-mean normalized cross-correlation of two equally sized grids.
///
/// Grids with no spatial variation carry no structure to compare: two equal
/// flat grids score `1`, any other pairing with a flat grid scores `0`.
pub fn grid_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "grid_correlation on different sizes");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut dot, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        dot += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    let scale = (va * vb).sqrt();
    if scale <= 1e-300 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (dot / scale).clamp(-1.0, 1.0)
}

/// Per-sequence sparsity summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub frame_count: usize,
    /// `[top 1%, top 5%, top 10%]` energy fractions per frame.
    pub per_frame_top: Vec<[f64; 3]>,
    pub mean_top1: f64,
    pub mean_top5: f64,
    pub mean_top10: f64,
    /// Correlation of consecutive DD spread grids.
    pub dd_correlation: Vec<f64>,
    /// Correlation of consecutive TF response grids.
    pub tf_correlation: Vec<f64>,
    pub mean_dd_correlation: f64,
    pub mean_tf_correlation: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Energy concentration per frame and consecutive-frame stability of the DD
/// and TF grids. Both domains are compared as magnitude grids with
/// [`grid_correlation`].
pub fn sparsity_report(seq: &ChannelSequence) -> Result<SparsityReport> {
    if seq.is_empty() {
        return arg_err("sparsity report needs at least one frame");
    }
    let mut dd_grids = Vec::with_capacity(seq.len());
    let mut tf_grids = Vec::with_capacity(seq.len());
    for frame in seq.frames() {
        dd_grids.push(dd_spread_grid(frame).into_data());
        tf_grids.push(
            tf_response(frame)
                .as_slice()
                .iter()
                .map(|z| z.norm())
                .collect::<Vec<_>>(),
        );
    }
    let per_frame_top: Vec<[f64; 3]> = dd_grids
        .iter()
        .map(|g| {
            [
                top_energy_fraction(g, 0.01),
                top_energy_fraction(g, 0.05),
                top_energy_fraction(g, 0.10),
            ]
        })
        .collect();
    let dd_correlation: Vec<f64> = dd_grids
        .windows(2)
        .map(|w| grid_correlation(&w[0], &w[1]))
        .collect();
    let tf_correlation: Vec<f64> = tf_grids
        .windows(2)
        .map(|w| grid_correlation(&w[0], &w[1]))
        .collect();
    let col = |i: usize| mean(&per_frame_top.iter().map(|t| t[i]).collect::<Vec<_>>());
    Ok(SparsityReport {
        frame_count: seq.len(),
        mean_top1: col(0),
        mean_top5: col(1),
        mean_top10: col(2),
        per_frame_top,
        mean_dd_correlation: mean(&dd_correlation),
        mean_tf_correlation: mean(&tf_correlation),
        dd_correlation,
        tf_correlation,
    })
}
