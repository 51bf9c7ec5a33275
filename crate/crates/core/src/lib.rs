//! Simulation of decoy-state BB84 QKD sharing a coherent PON with classical
//! C-band data: Raman noise budgets, detector statistics, key rates, parameter
//! sweeps and a Monte Carlo photon-counting cross-check.
//!
//! The numerical layers are generic over [`Real`]; the aliases below pin
//! them to `f64`, which is what scenarios, sweeps and the CLI use.

// `!(x > 0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decoy;
pub mod detector;
pub mod error;
pub mod oracle;
pub mod raman;
pub mod real;
pub mod report;
pub mod scenario;
pub mod topology;
pub mod units;

pub use error::{Error, Result};
pub use real::Real;

pub type PowerDbm = units::PowerDbm<f64>;
pub type PowerMw = units::PowerMw<f64>;
pub type OpticalChannel = units::OpticalChannel<f64>;
pub type AttenuationCurve = raman::AttenuationCurve<f64>;
pub type FiberSpec = raman::FiberSpec<f64>;
pub type RamanEfficiencyTable = raman::RamanEfficiencyTable<f64>;
pub type PonTopology = topology::PonTopology<f64>;
pub type WavelengthPlan = topology::WavelengthPlan<f64>;
pub type NoiseBudget = topology::NoiseBudget<f64>;
pub type DetectorModel = detector::DetectorModel<f64>;
pub type DecoyParams = decoy::DecoyParams<f64>;
pub type RatePoint = decoy::RatePoint<f64>;
pub use scenario::Scenario;

/// Single-precision variants of the numerical types.
pub mod single {
    pub type PonTopology = crate::topology::PonTopology<f32>;
    pub type DetectorModel = crate::detector::DetectorModel<f32>;
    pub type DecoyParams = crate::decoy::DecoyParams<f32>;
    pub type RamanEfficiencyTable = crate::raman::RamanEfficiencyTable<f32>;
}
