//! Sum-of-sinusoids Rayleigh fading with a Jakes Doppler spectrum.
//!
//! Each tap is
//!
//!   h(t) = √(p/S) · Σₙ exp(j(2π f_d cos αₙ t + φₙ)),   αₙ = (2πn + θ)/S
//!
//! with `S = 64` equal-power sinusoids, i.i.d. uniform phases `φₙ` and one
//! rotation `θ` per tap drawn from `π/2 ± π/4`. Keeping `θ` away from `0`
//! and `π` stops mirrored arrival angles from producing duplicate
//! frequencies, so the time-averaged autocorrelation converges to
//! `p·J₀(2π f_d τ)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;

use super::profile::PowerDelayProfile;
use crate::error::{arg_err, Result};

/// Sinusoids per tap.
pub const SINUSOIDS_PER_TAP: usize = 64;

// phasors are re-anchored to exact values this often
const RESYNC_INTERVAL: usize = 1024;

#[derive(Debug, Clone)]
struct TapOscillators {
    amplitude: f64,
    freqs_hz: Vec<f64>,
    phases: Vec<f64>,
}

impl TapOscillators {
    fn draw<R: Rng + ?Sized>(power: f64, f_d: f64, rng: &mut R) -> Self {
        let theta = FRAC_PI_2 + (rng.random::<f64>() * 2.0 - 1.0) * FRAC_PI_4;
        let s = SINUSOIDS_PER_TAP as f64;
        let freqs_hz = (0..SINUSOIDS_PER_TAP)
            .map(|n| f_d * ((2.0 * PI * n as f64 + theta) / s).cos())
            .collect();
        let phases = (0..SINUSOIDS_PER_TAP)
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect();
        Self {
            amplitude: (power / s).sqrt(),
            freqs_hz,
            phases,
        }
    }

    fn render(&self, sample_rate: f64, total: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        let steps: Vec<Complex64> = self
            .freqs_hz
            .iter()
            .map(|f| Complex64::from_polar(1.0, 2.0 * PI * f / sample_rate))
            .collect();
        let mut phasors = vec![Complex64::new(0.0, 0.0); SINUSOIDS_PER_TAP];
        for (start, chunk) in out.chunks_mut(RESYNC_INTERVAL).enumerate() {
            let t0 = (start * RESYNC_INTERVAL) as f64 / sample_rate;
            for ((ph, f), phi) in phasors.iter_mut().zip(&self.freqs_hz).zip(&self.phases) {
                *ph = Complex64::from_polar(self.amplitude, 2.0 * PI * f * t0 + phi);
            }
            for slot in chunk.iter_mut() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (ph, step) in phasors.iter_mut().zip(&steps) {
                    acc += *ph;
                    *ph *= step;
                }
                *slot = acc;
            }
        }
        out
    }
}

/// Complex gain trajectories of every tap, sampled at the time-domain rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TapGainTrack {
    sample_rate: f64,
    gains: Vec<Vec<Complex64>>,
}

impl TapGainTrack {
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn tap_count(&self) -> usize {
        self.gains.len()
    }

    /// Samples per tap.
    pub fn len(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tap(&self, index: usize) -> &[Complex64] {
        &self.gains[index]
    }
}

/// Draws independent fading processes for every tap of `pdp`, scaled to the
/// normalized tap powers. `f_d = 0` gives constant (static) taps.
pub fn generate_tap_gains<R: Rng + ?Sized>(
    pdp: &PowerDelayProfile,
    f_d: f64,
    sample_rate: f64,
    total_samples: usize,
    rng: &mut R,
) -> Result<TapGainTrack> {
    if total_samples == 0 {
        return arg_err("tap track needs at least one sample");
    }
    if !(f_d >= 0.0 && f_d.is_finite()) {
        return arg_err(format!("Doppler must be finite and non-negative, got {f_d}"));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return arg_err(format!("sample rate must be positive, got {sample_rate}"));
    }
    let gains = pdp
        .linear_powers()
        .into_iter()
        .map(|p| TapOscillators::draw(p, f_d, rng).render(sample_rate, total_samples))
        .collect();
    Ok(TapGainTrack { sample_rate, gains })
}

#[cfg(test)]
impl TapGainTrack {
    pub(crate) fn gains_mut(&mut self, tap: usize) -> &mut [Complex64] {
        &mut self.gains[tap]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn static_taps_are_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let track =
            generate_tap_gains(&PowerDelayProfile::eva(), 0.0, 240e3, 5000, &mut rng).unwrap();
        assert_eq!(track.tap_count(), 9);
        for tap in 0..9 {
            let g = track.tap(tap);
            assert!(g.iter().all(|z| (z - g[0]).norm() < 1e-12));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pdp = PowerDelayProfile::single_tap();
        assert!(generate_tap_gains(&pdp, 10.0, 1e3, 0, &mut rng).is_err());
        assert!(generate_tap_gains(&pdp, -1.0, 1e3, 10, &mut rng).is_err());
        assert!(generate_tap_gains(&pdp, 1.0, 0.0, 10, &mut rng).is_err());
    }

    #[test]
    fn phasor_recursion_tracks_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let osc = TapOscillators::draw(1.0, 1158.0, &mut rng);
        let fs = 240e3;
        let rendered = osc.render(fs, 3000);
        for p in [0, 1, 1023, 1024, 2999] {
            let t = p as f64 / fs;
            let direct: Complex64 = osc
                .freqs_hz
                .iter()
                .zip(&osc.phases)
                .map(|(f, phi)| Complex64::from_polar(osc.amplitude, 2.0 * PI * f * t + phi))
                .sum();
            assert!((rendered[p] - direct).norm() < 1e-11, "p={p}");
        }
    }
}
