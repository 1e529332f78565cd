//! DFT matrices, ISFFT/SFFT and the blockwise `(F_N ⊗ I_M)` maps.
//!
//! All transforms use the unitary `1/√n` DFT so each one is an isometry.
//! Vectors are column-stacked: entry `(m, n)` of an `M x N` grid lives at
//! index `n·M + m`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, DdChannelMatrix, OtfsDims};
use crate::error::{arg_err, shape_err, Result};

/// Unitary DFT matrix, `F[k, l] = exp(-j2πkl/n) / √n`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return arg_err("DFT size must be at least 1");
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |k, l| {
        // reduce kl mod n first so large sizes keep full phase precision
        let phase = -2.0 * PI * ((k * l) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    }))
}

fn check_grid(x: &ComplexMatrix, dims: OtfsDims) -> Result<()> {
    if x.shape() != (dims.m(), dims.n()) {
        return shape_err(format!(
            "expected a {}x{} grid, got {}x{}",
            dims.m(),
            dims.n(),
            x.rows(),
            x.cols()
        ));
    }
    Ok(())
}

/// DD grid to TF grid: `F_M · X_DD · F_N^H`.
pub fn isfft(x_dd: &ComplexMatrix, dims: OtfsDims) -> Result<ComplexMatrix> {
    check_grid(x_dd, dims)?;
    let fm = dft_matrix(dims.m())?;
    let fn_h = dft_matrix(dims.n())?.conj_transpose();
    fm.matmul(x_dd)?.matmul(&fn_h)
}

/// TF grid back to DD grid: `F_M^H · X_TF · F_N`.
pub fn sfft(x_tf: &ComplexMatrix, dims: OtfsDims) -> Result<ComplexMatrix> {
    check_grid(x_tf, dims)?;
    let fm_h = dft_matrix(dims.m())?.conj_transpose();
    let fn_ = dft_matrix(dims.n())?;
    fm_h.matmul(x_tf)?.matmul(&fn_)
}

/// Applies `(F_N ⊗ I_M)` (or its adjoint when `inverse`) to a length-`MN`
/// slice in place, mixing the `N` blocks of length `M`.
pub(crate) fn apply_doppler_blocks(
    v: &mut [Complex64],
    dims: OtfsDims,
    inverse: bool,
    scratch: &mut Vec<Complex64>,
) {
    let (m, n) = (dims.m(), dims.n());
    debug_assert_eq!(v.len(), m * n);
    if n == 1 {
        return;
    }
    let scale = 1.0 / (n as f64).sqrt();
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64))
        .collect();
    scratch.clear();
    scratch.resize(m * n, Complex64::new(0.0, 0.0));
    for out_block in 0..n {
        let dst = &mut scratch[out_block * m..(out_block + 1) * m];
        for in_block in 0..n {
            let w = twiddles[(out_block * in_block) % n] * scale;
            let src = &v[in_block * m..(in_block + 1) * m];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    v.copy_from_slice(scratch);
}

fn check_vec(x: &ComplexMatrix, dims: OtfsDims) -> Result<()> {
    if x.shape() != (dims.side(), 1) {
        return shape_err(format!(
            "expected a {}x1 vector, got {}x{}",
            dims.side(),
            x.rows(),
            x.cols()
        ));
    }
    Ok(())
}

/// Time-domain transmit signal `s = (F_N^H ⊗ I_M) · vec(X_DD)`.
pub fn heisenberg_transmit(x_dd_vec: &ComplexMatrix, dims: OtfsDims) -> Result<ComplexMatrix> {
    check_vec(x_dd_vec, dims)?;
    let mut out = x_dd_vec.clone();
    apply_doppler_blocks(out.as_mut_slice(), dims, true, &mut Vec::new());
    Ok(out)
}

/// Received DD vector `y = (F_N ⊗ I_M) · r`.
pub fn wigner_receive(r: &ComplexMatrix, dims: OtfsDims) -> Result<ComplexMatrix> {
    check_vec(r, dims)?;
    let mut out = r.clone();
    apply_doppler_blocks(out.as_mut_slice(), dims, false, &mut Vec::new());
    Ok(out)
}

/// `H_DD = (F_N ⊗ I_M) · H_TD · (F_N^H ⊗ I_M)`, applied blockwise.
pub fn td_to_dd_channel(h_td: &ComplexMatrix, dims: OtfsDims) -> Result<DdChannelMatrix> {
    let s = dims.side();
    if h_td.shape() != (s, s) {
        return shape_err(format!(
            "time-domain channel must be {s}x{s}, got {}x{}",
            h_td.rows(),
            h_td.cols()
        ));
    }
    let mat = conjugate_by_doppler(h_td, dims, false);
    DdChannelMatrix::new(dims, mat)
}

/// Inverse of [`td_to_dd_channel`]: `H_TD = (F_N^H ⊗ I_M) · H_DD · (F_N ⊗ I_M)`.
pub fn dd_to_td_channel(h_dd: &DdChannelMatrix) -> ComplexMatrix {
    conjugate_by_doppler(h_dd.matrix(), h_dd.dims(), true)
}

// A·H·A^H with A = (F_N ⊗ I_M), or A^H·H·A when `inverse`.
fn conjugate_by_doppler(h: &ComplexMatrix, dims: OtfsDims, inverse: bool) -> ComplexMatrix {
    let s = dims.side();
    let mut scratch = Vec::with_capacity(s);
    let mut col = vec![Complex64::new(0.0, 0.0); s];

    // left factor, column by column
    let mut left = ComplexMatrix::zeros(s, s);
    for c in 0..s {
        for r in 0..s {
            col[r] = h.get(r, c);
        }
        apply_doppler_blocks(&mut col, dims, inverse, &mut scratch);
        for r in 0..s {
            left.set(r, c, col[r]);
        }
    }

    // right factor: row · A^H = conj(A · conj(row))
    let mut out = left;
    for r in 0..s {
        let row = &mut out.as_mut_slice()[r * s..(r + 1) * s];
        for z in row.iter_mut() {
            *z = z.conj();
        }
        apply_doppler_blocks(row, dims, inverse, &mut scratch);
        for z in row.iter_mut() {
            *z = z.conj();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_small_cases() {
        let f1 = dft_matrix(1).unwrap();
        assert_eq!(f1.as_slice(), &[c(1.0, 0.0)]);

        let f2 = dft_matrix(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let expected = [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)];
        for (a, b) in f2.as_slice().iter().zip(expected) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(dft_matrix(0).is_err());
    }

    #[test]
    fn dft_is_unitary() {
        for n in [1, 2, 3, 5, 8, 16, 31] {
            let f = dft_matrix(n).unwrap();
            let prod = f.matmul(&f.conj_transpose()).unwrap();
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn isfft_delta_and_inverse() {
        let dims = OtfsDims::new(2, 2).unwrap();
        let mut delta = ComplexMatrix::zeros(2, 2);
        delta.set(0, 0, c(1.0, 0.0));
        let tf = isfft(&delta, dims).unwrap();
        for z in tf.as_slice() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        let back = sfft(&tf, dims).unwrap();
        assert!(back.max_abs_diff(&delta) < 1e-15);

        let zero = ComplexMatrix::zeros(2, 2);
        assert_eq!(isfft(&zero, dims).unwrap(), zero);
        assert_eq!(sfft(&zero, dims).unwrap(), zero);
    }

    #[test]
    fn grid_shape_is_checked() {
        let dims = OtfsDims::new(4, 2).unwrap();
        assert!(isfft(&ComplexMatrix::zeros(2, 4), dims).is_err());
        assert!(sfft(&ComplexMatrix::zeros(4, 3), dims).is_err());
        assert!(heisenberg_transmit(&ComplexMatrix::zeros(7, 1), dims).is_err());
        assert!(wigner_receive(&ComplexMatrix::zeros(8, 2), dims).is_err());
        assert!(td_to_dd_channel(&ComplexMatrix::zeros(8, 7), dims).is_err());
    }

    #[test]
    fn heisenberg_unit_vector() {
        let dims = OtfsDims::new(2, 2).unwrap();
        let mut e0 = vec![c(0.0, 0.0); 4];
        e0[0] = c(1.0, 0.0);
        let s = heisenberg_transmit(&ComplexMatrix::column(e0), dims).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let expected = [c(h, 0.0), c(0.0, 0.0), c(h, 0.0), c(0.0, 0.0)];
        for (a, b) in s.as_slice().iter().zip(expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn single_doppler_bin_is_identity() {
        let dims = OtfsDims::new(5, 1).unwrap();
        let x = ComplexMatrix::column((0..5).map(|i| c(i as f64, -(i as f64))).collect());
        assert_eq!(heisenberg_transmit(&x, dims).unwrap(), x);
        assert_eq!(wigner_receive(&x, dims).unwrap(), x);
    }

    #[test]
    fn identity_channel_maps_to_identity() {
        let dims = OtfsDims::new(4, 4).unwrap();
        let h = td_to_dd_channel(&ComplexMatrix::identity(16), dims).unwrap();
        assert!(h.matrix().max_abs_diff(&ComplexMatrix::identity(16)) < 1e-12);
    }
}
