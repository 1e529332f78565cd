use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::ComplexMatrix;
use crate::error::{arg_err, Result};

/// Adds circularly-symmetric complex white Gaussian noise at `snr_db`,
/// measured against the mean per-entry power of `signal`.
///
/// `f64::INFINITY` returns the signal untouched.
pub fn apply_awgn<R: Rng + ?Sized>(
    signal: &ComplexMatrix,
    snr_db: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let count = signal.as_slice().len();
    if count == 0 {
        return arg_err("cannot add noise to an empty signal");
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    if !snr_db.is_finite() {
        return arg_err(format!("SNR must be finite or +inf, got {snr_db}"));
    }
    let power = signal.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / count as f64;
    if power == 0.0 {
        return arg_err("SNR is undefined for a zero signal");
    }
    let noise_var = power / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_var / 2.0).sqrt();
    let mut out = signal.clone();
    for z in out.as_mut_slice() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex64::new(sigma * re, sigma * im);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn infinite_snr_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexMatrix::column(vec![Complex64::new(1.0, 2.0); 8]);
        assert_eq!(apply_awgn(&x, f64::INFINITY, &mut rng).unwrap(), x);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(apply_awgn(&ComplexMatrix::zeros(4, 1), 10.0, &mut rng).is_err());
        assert!(apply_awgn(&ComplexMatrix::zeros(0, 1), 10.0, &mut rng).is_err());
        let x = ComplexMatrix::column(vec![Complex64::new(1.0, 0.0); 4]);
        assert!(apply_awgn(&x, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn noise_variance_matches_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let x = ComplexMatrix::column(vec![Complex64::new(1.0, -1.0); n]);
        let y = apply_awgn(&x, 10.0, &mut rng).unwrap();
        let nominal = 2.0 / 10.0;
        let measured = y
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((measured / nominal - 1.0).abs() < 0.05, "measured {measured}");
    }
}
