//! Unit conversions and the ITU 100 GHz DWDM grid.
//!
//! All quantities are plain scalars tagged by newtypes. Powers use `-inf` dBm
//! as the "channel off" sentinel so that sweep grids stay rectangular.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Speed of light in nm·THz (exact).
pub const SPEED_OF_LIGHT_NM_THZ: f64 = 299_792.458;
/// Planck constant in J·s (exact).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Optical power in dBm. `-inf` means no light.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerDbm<T>(pub T);

/// Optical power in mW, never negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerMw<T>(pub T);

impl<T: Real> PowerDbm<T> {
    pub fn off() -> Self {
        PowerDbm(T::neg_infinity())
    }

    pub fn is_off(self) -> bool {
        self.0 == T::neg_infinity()
    }

    pub fn to_mw(self) -> PowerMw<T> {
        dbm_to_mw(self)
    }
}

impl<T: Real> PowerMw<T> {
    pub fn zero() -> Self {
        PowerMw(T::zero())
    }

    pub fn to_dbm(self) -> PowerDbm<T> {
        mw_to_dbm(self)
    }
}

impl<T: Real> std::ops::Add for PowerMw<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        PowerMw(self.0 + rhs.0)
    }
}

/// `10^(p/10)` mW; the `-inf` sentinel maps to exactly 0 mW.
pub fn dbm_to_mw<T: Real>(p: PowerDbm<T>) -> PowerMw<T> {
    if p.is_off() {
        return PowerMw::zero();
    }
    PowerMw(T::lit(10.0).powf(p.0 / T::lit(10.0)))
}

/// Inverse of [`dbm_to_mw`]; 0 mW maps to the `-inf` sentinel.
pub fn mw_to_dbm<T: Real>(p: PowerMw<T>) -> PowerDbm<T> {
    if p.0 <= T::zero() {
        return PowerDbm::off();
    }
    PowerDbm(T::lit(10.0) * p.0.log10())
}

/// Convert a loss in dB to linear transmittance.
pub fn db_to_transmittance<T: Real>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(10.0))
}

/// Convert attenuation in dB/km to the natural (1/km) coefficient.
pub fn db_per_km_to_natural<T: Real>(alpha_db_km: T) -> T {
    alpha_db_km * T::LN_10() / T::lit(10.0)
}

/// Channel-index bounds of the 100 GHz grid anchored at 190.0 THz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItuGrid {
    pub min_channel: i32,
    pub max_channel: i32,
}

impl Default for ItuGrid {
    fn default() -> Self {
        ItuGrid {
            min_channel: 1,
            max_channel: 60,
        }
    }
}

impl ItuGrid {
    /// `190.0 + 0.1·n` THz.
    pub fn frequency<T: Real>(&self, n: i32) -> Result<T> {
        if n < self.min_channel {
            return Err(Error::domain(format!(
                "ITU channel {n} below grid minimum {}",
                self.min_channel
            )));
        }
        if n > self.max_channel {
            return Err(Error::domain(format!(
                "ITU channel {n} above grid maximum {}",
                self.max_channel
            )));
        }
        // (1900 + n) / 10 keeps the result correctly rounded, unlike 190 + 0.1 * n.
        Ok(T::lit(f64::from(1900 + n)) / T::lit(10.0))
    }

    /// Nearest grid index for a frequency, if it lies on the grid within 1 GHz.
    pub fn channel_of<T: Real>(&self, f_thz: T) -> Option<i32> {
        let n = ((f_thz.as_f64() - 190.0) * 10.0).round();
        let on_grid = ((190.0 + n / 10.0) - f_thz.as_f64()).abs() < 1e-3;
        let n = n as i32;
        (on_grid && n >= self.min_channel && n <= self.max_channel).then_some(n)
    }
}

/// Frequency of ITU channel `n` on the default `[1, 60]` grid.
pub fn itu_channel_to_frequency<T: Real>(n: i32) -> Result<T> {
    ItuGrid::default().frequency(n)
}

/// `c / f` in nm for `f` in THz.
pub fn frequency_to_wavelength<T: Real>(f_thz: T) -> Result<T> {
    if !(f_thz > T::zero()) || !f_thz.is_finite() {
        return Err(Error::domain(format!(
            "frequency must be positive and finite, got {f_thz} THz"
        )));
    }
    Ok(T::lit(SPEED_OF_LIGHT_NM_THZ) / f_thz)
}

/// `c / λ` in THz for `λ` in nm.
pub fn wavelength_to_frequency<T: Real>(lambda_nm: T) -> Result<T> {
    if !(lambda_nm > T::zero()) || !lambda_nm.is_finite() {
        return Err(Error::domain(format!(
            "wavelength must be positive and finite, got {lambda_nm} nm"
        )));
    }
    Ok(T::lit(SPEED_OF_LIGHT_NM_THZ) / lambda_nm)
}

/// Photon flux `P / (h·f)` in photons per second.
pub fn photons_per_second<T: Real>(p: PowerMw<T>, f_thz: T) -> T {
    // Split the scale factors so that f32 never forms a subnormal intermediate.
    let energy_j = T::lit(PLANCK_J_S * 1e12) * f_thz;
    p.0 * T::lit(1e-3) / energy_j
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    Downstream,
    Upstream,
    Qkd,
}

/// A single optical carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalChannel<T> {
    pub frequency_thz: T,
    pub role: ChannelRole,
}

impl<T: Real> OpticalChannel<T> {
    pub fn new(frequency_thz: T, role: ChannelRole) -> Result<Self> {
        frequency_to_wavelength(frequency_thz)?;
        Ok(OpticalChannel {
            frequency_thz,
            role,
        })
    }

    pub fn from_wavelength(lambda_nm: T, role: ChannelRole) -> Result<Self> {
        Self::new(wavelength_to_frequency(lambda_nm)?, role)
    }

    pub fn wavelength_nm(&self) -> T {
        T::lit(SPEED_OF_LIGHT_NM_THZ) / self.frequency_thz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_examples() {
        assert_eq!(dbm_to_mw(PowerDbm(0.0_f64)).0, 1.0);
        assert!((dbm_to_mw(PowerDbm(9.2_f64)).0 - 8.317_637_7).abs() < 1e-7);
        assert_eq!(dbm_to_mw(PowerDbm::<f64>::off()).0, 0.0);
        assert!(mw_to_dbm(PowerMw(0.0_f64)).is_off());
    }

    #[test]
    fn itu_examples() {
        assert_eq!(itu_channel_to_frequency::<f64>(13).unwrap(), 191.3);
        assert_eq!(itu_channel_to_frequency::<f64>(30).unwrap(), 193.0);
        let err = itu_channel_to_frequency::<f64>(0).unwrap_err();
        assert!(err.to_string().contains("minimum 1"), "{err}");
        let err = itu_channel_to_frequency::<f64>(61).unwrap_err();
        assert!(err.to_string().contains("maximum 60"), "{err}");
        let narrow = ItuGrid {
            min_channel: 10,
            max_channel: 20,
        };
        assert!(narrow.frequency::<f64>(9).is_err());
        assert_eq!(narrow.channel_of(191.3_f64), Some(13));
        assert_eq!(narrow.channel_of(191.35_f64), None);
    }

    #[test]
    fn wavelength_examples() {
        let ch13 = frequency_to_wavelength(191.3_f64).unwrap();
        assert!((ch13 - 1567.13).abs() < 0.01, "{ch13}");
        assert_eq!(frequency_to_wavelength(299_792.458_f64).unwrap(), 1.0);
        assert!((frequency_to_wavelength(228.849_f64).unwrap() - 1310.0).abs() < 0.01);
        assert!(frequency_to_wavelength(0.0_f64).is_err());
        assert!(frequency_to_wavelength(-1.0_f64).is_err());
    }

    #[test]
    fn photon_flux_examples() {
        assert_eq!(photons_per_second(PowerMw(0.0_f64), 228.849), 0.0);
        let n = photons_per_second(PowerMw(1e-9_f64), 228.849);
        assert!((n / 6.595e6 - 1.0).abs() < 1e-3, "{n}");
        let n2 = photons_per_second(PowerMw(2e-9_f64), 228.849);
        assert_eq!(n2, 2.0 * n);
        // f32 path stays normal
        let n32 = photons_per_second(PowerMw(1e-9_f32), 228.849);
        assert!((n32 / 6.595e6 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn channel_wavelength_product_is_c() {
        let ch = OpticalChannel::new(193.1_f64, ChannelRole::Downstream).unwrap();
        let rel = (ch.wavelength_nm() * ch.frequency_thz / SPEED_OF_LIGHT_NM_THZ - 1.0).abs();
        assert!(rel < 1e-9);
        let q = OpticalChannel::from_wavelength(1310.0_f64, ChannelRole::Qkd).unwrap();
        assert!((q.wavelength_nm() - 1310.0).abs() < 1e-9);
    }
}
