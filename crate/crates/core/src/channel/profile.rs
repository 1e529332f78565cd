use crate::error::{arg_err, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// LTE subcarrier spacing used when none is given.
pub const DEFAULT_SUBCARRIER_SPACING_HZ: f64 = 15_000.0;

/// Terminal speed and carrier numerology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityProfile {
    speed_kmh: f64,
    carrier_hz: f64,
    subcarrier_spacing_hz: f64,
}

impl MobilityProfile {
    pub fn new(speed_kmh: f64, carrier_hz: f64, subcarrier_spacing_hz: f64) -> Result<Self> {
        if !(speed_kmh >= 0.0 && speed_kmh.is_finite()) {
            return arg_err(format!("speed must be finite and non-negative, got {speed_kmh}"));
        }
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return arg_err(format!("carrier must be positive, got {carrier_hz}"));
        }
        if !(subcarrier_spacing_hz > 0.0 && subcarrier_spacing_hz.is_finite()) {
            return arg_err(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing_hz}"
            ));
        }
        Ok(Self {
            speed_kmh,
            carrier_hz,
            subcarrier_spacing_hz,
        })
    }

    /// 500 km/h at 2.5 GHz with 15 kHz spacing.
    pub fn high_speed_rail() -> Self {
        Self {
            speed_kmh: 500.0,
            carrier_hz: 2.5e9,
            subcarrier_spacing_hz: DEFAULT_SUBCARRIER_SPACING_HZ,
        }
    }

    pub fn with_speed(self, speed_kmh: f64) -> Result<Self> {
        Self::new(speed_kmh, self.carrier_hz, self.subcarrier_spacing_hz)
    }

    pub fn speed_kmh(&self) -> f64 {
        self.speed_kmh
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }
}

/// Maximum Doppler shift `v·f_c/c` in Hz.
pub fn max_doppler(profile: &MobilityProfile) -> f64 {
    (profile.speed_kmh / 3.6) * profile.carrier_hz / SPEED_OF_LIGHT
}

/// Extended Vehicular A tap delays (ns).
pub const EVA_DELAYS_NS: [f64; 9] = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];
/// Extended Vehicular A relative tap powers (dB).
pub const EVA_POWERS_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];

/// Tapped-delay-line power profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    tap_delays_s: Vec<f64>,
    tap_powers_db: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(tap_delays_s: Vec<f64>, tap_powers_db: Vec<f64>) -> Result<Self> {
        if tap_delays_s.is_empty() || tap_delays_s.len() != tap_powers_db.len() {
            return arg_err(format!(
                "need matching non-empty delay/power lists, got {} and {}",
                tap_delays_s.len(),
                tap_powers_db.len()
            ));
        }
        if tap_delays_s.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return arg_err("tap delays must be finite and non-negative");
        }
        if tap_delays_s.windows(2).any(|w| w[1] < w[0]) {
            return arg_err("tap delays must be non-decreasing");
        }
        if tap_powers_db.iter().any(|p| !p.is_finite()) {
            return arg_err("tap powers must be finite");
        }
        Ok(Self {
            tap_delays_s,
            tap_powers_db,
        })
    }

    /// The standard 9-tap EVA profile.
    pub fn eva() -> Self {
        Self {
            tap_delays_s: EVA_DELAYS_NS.iter().map(|ns| ns * 1e-9).collect(),
            tap_powers_db: EVA_POWERS_DB.to_vec(),
        }
    }

    /// One tap at zero delay, 0 dB.
    pub fn single_tap() -> Self {
        Self {
            tap_delays_s: vec![0.0],
            tap_powers_db: vec![0.0],
        }
    }

    pub fn tap_count(&self) -> usize {
        self.tap_delays_s.len()
    }

    pub fn tap_delays_s(&self) -> &[f64] {
        &self.tap_delays_s
    }

    pub fn tap_powers_db(&self) -> &[f64] {
        &self.tap_powers_db
    }

    /// Linear tap powers normalized to unit sum.
    pub fn linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self
            .tap_powers_db
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    /// Tap delays rounded to the nearest sample at `sample_rate`.
    pub fn delays_in_samples(&self, sample_rate: f64) -> Vec<usize> {
        self.tap_delays_s
            .iter()
            .map(|d| (d * sample_rate).round() as usize)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doppler_values() {
        let p = MobilityProfile::new(0.0, 2.5e9, 15e3).unwrap();
        assert_eq!(max_doppler(&p), 0.0);
        let fast = MobilityProfile::high_speed_rail();
        let fd = max_doppler(&fast);
        assert!((fd - 500.0 / 3.6 * 2.5e9 / 2.99792458e8).abs() < 1e-9);
        assert!((fd - 1158.2).abs() < 0.05);
        let half = max_doppler(&fast.with_speed(250.0).unwrap());
        assert!((2.0 * half - fd).abs() < 1e-9);
    }

    #[test]
    fn profile_validation() {
        assert!(MobilityProfile::new(-1.0, 1e9, 15e3).is_err());
        assert!(MobilityProfile::new(1.0, 0.0, 15e3).is_err());
        assert!(MobilityProfile::new(1.0, 1e9, 0.0).is_err());
        assert!(PowerDelayProfile::new(vec![], vec![]).is_err());
        assert!(PowerDelayProfile::new(vec![0.0, 1e-6], vec![0.0]).is_err());
        assert!(PowerDelayProfile::new(vec![1e-6, 0.0], vec![0.0, 0.0]).is_err());
        assert!(PowerDelayProfile::new(vec![-1e-6], vec![0.0]).is_err());
    }

    #[test]
    fn eva_powers_sum_to_one() {
        let eva = PowerDelayProfile::eva();
        assert_eq!(eva.tap_count(), 9);
        let total: f64 = eva.linear_powers().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // 15 kHz x 16 bins: only the weakest tap leaves delay zero
        assert_eq!(eva.delays_in_samples(240e3), vec![0, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(eva.delays_in_samples(960e3), vec![0, 0, 0, 0, 0, 1, 1, 2, 2]);
    }
}
