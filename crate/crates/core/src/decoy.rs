//! Asymptotic vacuum + weak decoy-state BB84.
//!
//! The channel is the usual Poisson source through a lossy link with
//! `Y_n = Y0 + 1 − (1 − η)^n`. From the observed signal and decoy gains the
//! single-photon yield is lower-bounded and its error rate upper-bounded;
//! the key rate follows the GLLP form with a constant error-correction
//! inefficiency.

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyParams<T> {
    /// Signal mean photon number.
    pub mu: T,
    /// Weak decoy mean photon number.
    pub nu: T,
    /// Optical misalignment error.
    pub e_d: T,
    pub q_sift: T,
    pub f_ec: T,
    /// Error rate of background clicks.
    pub e0: T,
}

impl<T: Real> Default for DecoyParams<T> {
    fn default() -> Self {
        DecoyParams {
            mu: T::lit(0.5),
            nu: T::lit(0.1),
            e_d: T::lit(0.01),
            q_sift: T::lit(0.5),
            f_ec: T::lit(1.16),
            e0: T::lit(0.5),
        }
    }
}

impl<T: Real> DecoyParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > T::zero() && self.nu < self.mu) || !self.mu.is_finite() {
            return Err(Error::config(
                "decoy.decoy_mean_photons",
                format!("need 0 < nu < mu, got nu = {}, mu = {}", self.nu, self.mu),
            ));
        }
        if !(self.e_d >= T::zero() && self.e_d < T::lit(0.5)) {
            return Err(Error::config(
                "decoy.misalignment_error",
                "must lie in [0, 0.5)",
            ));
        }
        if !(self.q_sift > T::zero() && self.q_sift <= T::one()) {
            return Err(Error::config("decoy.sift_factor", "must lie in (0, 1]"));
        }
        if !(self.f_ec >= T::one()) || !self.f_ec.is_finite() {
            return Err(Error::config(
                "decoy.error_correction_inefficiency",
                "must be >= 1",
            ));
        }
        Ok(())
    }
}

/// Binary Shannon entropy in bits.
pub fn h2<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!(
            "binary entropy argument {x} outside [0, 1]"
        )));
    }
    if x == T::zero() || x == T::one() {
        return Ok(T::zero());
    }
    let y = T::one() - x;
    Ok(-x * x.log2() - y * y.log2())
}

/// Overall gain and QBER at mean photon number `intensity`.
///
/// `eta_channel` is the optical path transmittance; detector efficiency is
/// folded in here. With `Q = 0` the QBER is reported as `e0`.
pub fn gain_and_qber<T: Real>(
    eta_channel: T,
    det: &DetectorModel<T>,
    y0: T,
    intensity: T,
    params: &DecoyParams<T>,
) -> (T, T) {
    let eta = eta_channel * det.efficiency;
    let signal = -(-eta * intensity).exp_m1();
    let q = y0 + signal;
    if q == T::zero() {
        return (q, params.e0);
    }
    (q, (params.e0 * y0 + params.e_d * signal) / q)
}

/// Lower bound on `Y1` and upper bound on `e1` from signal, weak decoy and vacuum.
///
/// Returns `(0, 0.5)` when no single-photon contribution can be certified.
pub fn decoy_bounds<T: Real>(
    q_mu: T,
    _e_mu: T,
    q_nu: T,
    e_nu: T,
    y0: T,
    params: &DecoyParams<T>,
) -> (T, T) {
    let (mu, nu) = (params.mu, params.nu);
    let half = T::lit(0.5);
    let mu2 = mu * mu;
    let nu2 = nu * nu;
    let raw = mu / (mu * nu - nu2)
        * (q_nu * nu.exp() - q_mu * mu.exp() * nu2 / mu2 - (mu2 - nu2) / mu2 * y0);
    let y1 = raw.min(T::one());
    if !(y1 > T::zero()) {
        return (T::zero(), half);
    }
    let e1 = (e_nu * q_nu * nu.exp() - params.e0 * y0) / (y1 * nu);
    (y1, e1.max(T::zero()).min(half))
}

/// Observed and estimated quantities that determine the key rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs<T> {
    pub q_mu: T,
    pub e_mu: T,
    pub y1_lower: T,
    pub e1_upper: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint<T> {
    pub q_mu: T,
    pub e_mu: T,
    pub q_nu: T,
    pub e_nu: T,
    pub y1_lower: T,
    pub e1_upper: T,
    pub q1_lower: T,
    pub r_bits_per_pulse: T,
    pub skr_bps: T,
}

/// Asymptotic secure key rate, clamped at zero.
pub fn secure_rate<T: Real>(
    inputs: &RateInputs<T>,
    params: &DecoyParams<T>,
    pulse_rate_hz: T,
) -> RatePoint<T> {
    let clamp01 = |x: T| x.max(T::zero()).min(T::one());
    let q1 = inputs.y1_lower * params.mu * (-params.mu).exp();
    let leak = inputs.q_mu * params.f_ec * h2(clamp01(inputs.e_mu)).expect("clamped");
    let private = q1 * (T::one() - h2(clamp01(inputs.e1_upper)).expect("clamped"));
    let r = if inputs.y1_lower > T::zero() {
        (params.q_sift * (private - leak)).max(T::zero())
    } else {
        T::zero()
    };
    RatePoint {
        q_mu: inputs.q_mu,
        e_mu: inputs.e_mu,
        q_nu: T::nan(),
        e_nu: T::nan(),
        y1_lower: inputs.y1_lower,
        e1_upper: inputs.e1_upper,
        q1_lower: q1,
        r_bits_per_pulse: r,
        skr_bps: r * pulse_rate_hz,
    }
}

/// Full chain from path transmittance and background yield to a rate point.
pub fn evaluate<T: Real>(
    eta_channel: T,
    det: &DetectorModel<T>,
    y0: T,
    params: &DecoyParams<T>,
) -> RatePoint<T> {
    let (q_mu, e_mu) = gain_and_qber(eta_channel, det, y0, params.mu, params);
    let (q_nu, e_nu) = gain_and_qber(eta_channel, det, y0, params.nu, params);
    let (y1_lower, e1_upper) = decoy_bounds(q_mu, e_mu, q_nu, e_nu, y0, params);
    let mut point = secure_rate(
        &RateInputs {
            q_mu,
            e_mu,
            y1_lower,
            e1_upper,
        },
        params,
        det.pulse_rate_hz,
    );
    point.q_nu = q_nu;
    point.e_nu = e_nu;
    point
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_detector() -> DetectorModel<f64> {
        DetectorModel {
            efficiency: 1.0,
            ..DetectorModel::default()
        }
    }

    #[test]
    fn h2_examples() {
        assert_eq!(h2(0.5_f64).unwrap(), 1.0);
        assert_eq!(h2(0.0_f64).unwrap(), 0.0);
        assert_eq!(h2(1.0_f64).unwrap(), 0.0);
        assert!((h2(0.11_f64).unwrap() - 0.499_916).abs() < 1e-6);
        assert!(h2(-0.1_f64).is_err());
        assert!(h2(1.1_f64).is_err());
        assert!(h2(f64::NAN).is_err());
    }

    #[test]
    fn gain_examples() {
        let det = ideal_detector();
        let p = DecoyParams {
            e_d: 0.0,
            ..DecoyParams::default()
        };
        let (_, e) = gain_and_qber(0.3, &det, 0.0, 0.5, &p);
        assert_eq!(e, 0.0);

        let (q, e) = gain_and_qber(1.0, &det, 0.0, 200.0, &DecoyParams::default());
        assert_eq!(q, 1.0);
        assert!((e - 0.01).abs() < 1e-15);

        let (q, e) = gain_and_qber(0.1, &det, 1e-5, 0.5, &DecoyParams::default());
        assert!((q - 0.048_780_6).abs() < 1e-7, "{q}");
        assert!((e - 0.010_100).abs() < 1e-5, "{e}");

        let dark = DecoyParams::default();
        assert_eq!(gain_and_qber(0.0, &det, 0.0, 0.5, &dark), (0.0, 0.5));
    }

    #[test]
    fn bounds_on_perfect_channel() {
        let det = ideal_detector();
        let p = DecoyParams {
            e_d: 0.0,
            ..DecoyParams::default()
        };
        let (qm, em) = gain_and_qber(1.0, &det, 0.0, p.mu, &p);
        let (qn, en) = gain_and_qber(1.0, &det, 0.0, p.nu, &p);
        let (y1, e1) = decoy_bounds(qm, em, qn, en, 0.0, &p);
        assert!(y1 <= 1.0 && y1 > 0.0);
        assert_eq!(e1, 0.0);
    }

    #[test]
    fn no_single_photon_signal() {
        let p = DecoyParams::<f64>::default();
        assert_eq!(decoy_bounds(0.0, 0.5, 0.0, 0.5, 0.0, &p), (0.0, 0.5));
        let inputs = RateInputs {
            q_mu: 1e-3,
            e_mu: 0.02,
            y1_lower: 0.0,
            e1_upper: 0.5,
        };
        assert_eq!(secure_rate(&inputs, &p, 25e6).r_bits_per_pulse, 0.0);
    }

    #[test]
    fn bb84_cutoff() {
        let p = DecoyParams::<f64>::default();
        let inputs = RateInputs {
            q_mu: 1e-3,
            e_mu: 0.2,
            y1_lower: 1e-3,
            e1_upper: 0.11,
        };
        assert_eq!(secure_rate(&inputs, &p, 25e6).r_bits_per_pulse, 0.0);
    }

    #[test]
    fn noiseless_channel_is_profitable() {
        let det = DetectorModel {
            dark_prob: 0.0,
            ..DetectorModel::default()
        };
        let p = DecoyParams {
            e_d: 0.0,
            ..DecoyParams::default()
        };
        for eta in [1e-6, 1e-3, 0.5, 1.0] {
            let pt = evaluate(eta, &det, 0.0, &p);
            assert!(pt.r_bits_per_pulse > 0.0, "eta = {eta}");
            assert_eq!(pt.skr_bps, pt.r_bits_per_pulse * det.pulse_rate_hz);
        }
    }

    #[test]
    fn params_validation() {
        let mut p = DecoyParams::<f64>::default();
        p.nu = 0.6;
        assert!(p.validate().is_err());
        let mut p = DecoyParams::<f64>::default();
        p.f_ec = 0.9;
        assert!(p.validate().is_err());
        let mut p = DecoyParams::<f64>::default();
        p.e_d = 0.5;
        assert!(p.validate().is_err());
        DecoyParams::<f32>::default().validate().unwrap();
    }
}
