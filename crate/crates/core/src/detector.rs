//! Gated single-photon detectors shared at the OLT.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::topology::NoiseBudget;
use crate::units::{photons_per_second, wavelength_to_frequency};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<T> {
    pub efficiency: T,
    /// Dark-count probability per gate, per detector.
    pub dark_prob: T,
    pub gate_width_ns: T,
    pub pulse_rate_hz: T,
    pub num_detectors: u32,
}

impl<T: Real> Default for DetectorModel<T> {
    fn default() -> Self {
        DetectorModel {
            efficiency: T::lit(0.20),
            dark_prob: T::lit(1e-6),
            gate_width_ns: T::lit(1.0),
            pulse_rate_hz: T::lit(25e6),
            num_detectors: 4,
        }
    }
}

impl<T: Real> DetectorModel<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |key: &str, v: T| {
            if v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must lie in [0, 1]")))
            }
        };
        unit("detector.efficiency", self.efficiency)?;
        unit("detector.dark_prob_per_gate", self.dark_prob)?;
        if !(self.gate_width_ns > T::zero()) {
            return Err(Error::config(
                "detector.gate_width_ns",
                "gate width must be > 0",
            ));
        }
        if !(self.pulse_rate_hz > T::zero()) || !self.pulse_rate_hz.is_finite() {
            return Err(Error::config(
                "detector.pulse_rate_hz",
                "pulse rate must be > 0",
            ));
        }
        if self.gate_width_ns * T::lit(1e-9) * self.pulse_rate_hz > T::one() {
            return Err(Error::config(
                "detector.gate_width_ns",
                "gates overlap: gate width times pulse rate exceeds 1",
            ));
        }
        if self.num_detectors == 0 {
            return Err(Error::config(
                "detector.num_detectors",
                "need at least one detector",
            ));
        }
        Ok(())
    }

    pub fn gate_width_s(&self) -> T {
        self.gate_width_ns * T::lit(1e-9)
    }

    /// Combined dark floor `num_detectors · p_dark`.
    pub fn dark_floor(&self) -> T {
        T::lit(f64::from(self.num_detectors)) * self.dark_prob
    }
}

/// Probability that SpRS photons fire at least one detector within a gate.
pub fn noise_click_prob<T: Real>(
    budget: &NoiseBudget<T>,
    lambda_qkd_nm: T,
    det: &DetectorModel<T>,
) -> Result<T> {
    let f = wavelength_to_frequency(lambda_qkd_nm)?;
    let rate = photons_per_second(budget.total_mw, f);
    Ok(noise_click_prob_from_rate(rate, det))
}

/// `1 − exp(−rate·η_d·τ)` for a photon arrival rate in 1/s.
pub fn noise_click_prob_from_rate<T: Real>(rate_per_s: T, det: &DetectorModel<T>) -> T {
    -(-rate_per_s * det.efficiency * det.gate_width_s()).exp_m1()
}

/// Background yield `Y0 = 1 − (1 − p_dark)^n · (1 − p_noise)`.
pub fn y0_total<T: Real>(det: &DetectorModel<T>, p_noise: T) -> T {
    let silent = (T::one() - det.dark_prob).powi(det.num_detectors as i32) * (T::one() - p_noise);
    (T::one() - silent).max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::PowerMw;

    #[test]
    fn defaults_are_valid() {
        let d = DetectorModel::<f64>::default();
        d.validate().unwrap();
        assert_eq!(d.dark_floor(), 4e-6);
        // 175 b/s at 7e-6 bits per pulse
        assert!((175.0 / 7e-6 - d.pulse_rate_hz).abs() < 1e-3);
    }

    #[test]
    fn validation_errors() {
        let mut d = DetectorModel::<f64>::default();
        d.efficiency = 1.5;
        assert!(d.validate().is_err());
        let mut d = DetectorModel::<f64>::default();
        d.gate_width_ns = 100.0;
        let err = d.validate().unwrap_err();
        assert!(err.to_string().contains("gate_width_ns"));
        let mut d = DetectorModel::<f64>::default();
        d.num_detectors = 0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn noise_click_examples() {
        let d = DetectorModel::<f64>::default();
        assert_eq!(
            noise_click_prob(&NoiseBudget::default(), 1310.0, &d).unwrap(),
            0.0
        );

        let d = DetectorModel {
            efficiency: 0.2,
            gate_width_ns: 1.0,
            ..DetectorModel::default()
        };
        let p: f64 = noise_click_prob_from_rate(1e6, &d);
        assert!((p - 1.999_80e-4).abs() < 1e-9, "{p}");

        // small-signal linearity
        let budget = NoiseBudget::new(PowerMw(1e-9_f64), PowerMw(0.0));
        let p = noise_click_prob(&budget, 1310.0, &d).unwrap();
        let lin = photons_per_second(PowerMw(1e-9), 299_792.458 / 1310.0) * 0.2 * 1e-9;
        assert!(lin < 0.02);
        assert!((p / lin - 1.0).abs() < 0.01);
    }

    #[test]
    fn y0_examples() {
        let mut d = DetectorModel::<f64> {
            dark_prob: 0.0,
            ..DetectorModel::default()
        };
        assert_eq!(y0_total(&d, 0.0), 0.0);
        d.dark_prob = 1.0;
        assert_eq!(y0_total(&d, 0.0), 1.0);
        assert_eq!(y0_total(&d, 0.7), 1.0);
        d.dark_prob = 1e-6;
        let y0 = y0_total(&d, 1e-5);
        assert!((y0 - 1.399_99e-5).abs() < 1e-10, "{y0}");
    }
}
