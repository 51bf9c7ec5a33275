//! Fiber attenuation and spontaneous Raman scattering (SpRS) noise.
//!
//! Noise generated at position `z` by a pump of local power `p(z) = p_in·e^(−α_p z)`
//! is `ρ·Δλ·p(z)·dz`. Forward noise co-propagates to the far end of the span;
//! backward noise returns to the launch end. Both closed forms below are the
//! integrals of that local source attenuated at the QKD wavelength.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::units::{db_per_km_to_natural, PowerMw};

/// Wavelength range (nm) over which every attenuation curve is defined.
pub const ATTENUATION_DOMAIN_NM: (f64, f64) = (1260.0, 1625.0);

/// Piecewise-linear attenuation in dB/km versus wavelength, held flat beyond
/// its outermost points up to the edges of [`ATTENUATION_DOMAIN_NM`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationCurve<T> {
    points: Vec<(T, T)>,
}

impl<T: Real> Default for AttenuationCurve<T> {
    fn default() -> Self {
        AttenuationCurve {
            points: vec![
                (T::lit(1310.0), T::lit(0.33)),
                (T::lit(1550.0), T::lit(0.20)),
            ],
        }
    }
}

impl<T: Real> AttenuationCurve<T> {
    /// Build from `(wavelength_nm, db_per_km)` pairs with strictly increasing wavelength.
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("attenuation curve needs at least one point"));
        }
        let (lo, hi) = (
            T::lit(ATTENUATION_DOMAIN_NM.0),
            T::lit(ATTENUATION_DOMAIN_NM.1),
        );
        for (i, &(wl, a)) in points.iter().enumerate() {
            if !(wl >= lo && wl <= hi) {
                return Err(Error::domain(format!(
                    "attenuation point {wl} nm outside [{lo}, {hi}] nm"
                )));
            }
            if !(a >= T::zero()) || !a.is_finite() {
                return Err(Error::domain(format!(
                    "attenuation {a} dB/km at {wl} nm must be >= 0"
                )));
            }
            if i > 0 && !(wl > points[i - 1].0) {
                return Err(Error::domain(
                    "attenuation wavelengths must be strictly increasing",
                ));
            }
        }
        Ok(AttenuationCurve { points })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    /// Attenuation in dB/km at `lambda_nm`.
    pub fn db_per_km(&self, lambda_nm: T) -> Result<T> {
        let (lo, hi) = (
            T::lit(ATTENUATION_DOMAIN_NM.0),
            T::lit(ATTENUATION_DOMAIN_NM.1),
        );
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::domain(format!(
                "wavelength {lambda_nm} nm outside attenuation domain [{lo}, {hi}] nm"
            )));
        }
        Ok(interpolate(&self.points, lambda_nm))
    }

    pub fn natural_per_km(&self, lambda_nm: T) -> Result<T> {
        self.db_per_km(lambda_nm).map(db_per_km_to_natural)
    }
}

/// Linear interpolation over sorted `(x, y)` knots, clamped to the end values.
fn interpolate<T: Real>(knots: &[(T, T)], x: T) -> T {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|&(k, _)| k <= x);
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// A single fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec<T> {
    pub length_km: T,
    pub attenuation: AttenuationCurve<T>,
}

impl<T: Real> FiberSpec<T> {
    pub fn new(length_km: T, attenuation: AttenuationCurve<T>) -> Result<Self> {
        if !(length_km >= T::zero()) || !length_km.is_finite() {
            return Err(Error::domain(format!(
                "fiber length {length_km} km must be >= 0"
            )));
        }
        Ok(FiberSpec {
            length_km,
            attenuation,
        })
    }

    /// Standard single-mode fiber of the given length with the default curve.
    pub fn standard(length_km: T) -> Result<Self> {
        Self::new(length_km, AttenuationCurve::default())
    }
}

/// Total span loss in dB at `lambda_nm`.
pub fn span_loss_db<T: Real>(fiber: &FiberSpec<T>, lambda_nm: T) -> Result<T> {
    Ok(fiber.attenuation.db_per_km(lambda_nm)? * fiber.length_km)
}

/// Raman efficiency `ρ` (1/(km·nm)) into the QKD band as a function of pump frequency.
///
/// Rows are kept sorted by ascending pump frequency. Between rows `ρ` is linear
/// in frequency; outside them it is held at the nearest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanEfficiencyTable<T> {
    rows: Vec<(T, T)>,
    pub filter_bandwidth_nm: T,
}

impl<T: Real> RamanEfficiencyTable<T> {
    /// Rows are `(pump_frequency_thz, rho)`; they are sorted here.
    pub fn new(mut rows: Vec<(T, T)>, filter_bandwidth_nm: T) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("Raman table needs at least one row"));
        }
        if !(filter_bandwidth_nm > T::zero()) || !filter_bandwidth_nm.is_finite() {
            return Err(Error::domain(format!(
                "filter bandwidth {filter_bandwidth_nm} nm must be > 0"
            )));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite frequencies"));
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::domain(format!(
                    "duplicate Raman row at {} THz",
                    w[0].0
                )));
            }
        }
        for &(f, rho) in &rows {
            if !(f > T::zero()) || !f.is_finite() {
                return Err(Error::domain(format!(
                    "Raman row frequency {f} THz must be > 0"
                )));
            }
            if !(rho > T::zero()) || !rho.is_finite() {
                return Err(Error::domain(format!(
                    "Raman efficiency {rho} at {f} THz must be > 0"
                )));
            }
        }
        Ok(RamanEfficiencyTable {
            rows,
            filter_bandwidth_nm,
        })
    }

    pub fn rows(&self) -> &[(T, T)] {
        &self.rows
    }

    /// `true` when `ρ` never increases as the pump moves to lower frequency.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    pub fn efficiency(&self, pump_thz: T) -> T {
        interpolate(&self.rows, pump_thz)
    }

    /// Same table with every `ρ` replaced by `f(frequency, ρ)`.
    pub fn map_efficiency(&self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|&(fr, rho)| (fr, f(fr, rho)))
            .collect();
        Self::new(rows, self.filter_bandwidth_nm)
    }
}

/// Forward SpRS power (mW) reaching the far end of a span of length `length_km`.
///
/// `alpha_pump` and `alpha_qkd` are natural attenuation coefficients in 1/km.
pub fn sprs_forward_mw<T: Real>(
    p_in: PowerMw<T>,
    rho: T,
    bandwidth_nm: T,
    length_km: T,
    alpha_pump: T,
    alpha_qkd: T,
) -> PowerMw<T> {
    let scale = p_in.0 * rho * bandwidth_nm;
    if scale == T::zero() || length_km == T::zero() {
        return PowerMw::zero();
    }
    let d = alpha_pump - alpha_qkd;
    let value = if d.abs() < T::lit(1e-9) {
        let alpha = (alpha_pump + alpha_qkd) / T::lit(2.0);
        scale * length_km * (-alpha * length_km).exp()
    } else {
        scale * ((-alpha_qkd * length_km).exp() - (-alpha_pump * length_km).exp()) / d
    };
    PowerMw(value)
}

/// Backward SpRS power (mW) returning to the launch end of the span.
pub fn sprs_backward_mw<T: Real>(
    p_in: PowerMw<T>,
    rho: T,
    bandwidth_nm: T,
    length_km: T,
    alpha_pump: T,
    alpha_qkd: T,
) -> PowerMw<T> {
    let scale = p_in.0 * rho * bandwidth_nm;
    if scale == T::zero() || length_km == T::zero() {
        return PowerMw::zero();
    }
    let sum = alpha_pump + alpha_qkd;
    if sum == T::zero() {
        return PowerMw(scale * length_km);
    }
    PowerMw(scale * (T::one() - (-sum * length_km).exp()) / sum)
}
