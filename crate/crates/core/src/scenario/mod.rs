//! Named experiments: parameter sweeps, cutoff search and Raman calibration.

mod calibrate;
mod sweep;

pub use calibrate::{
    calibrate, default_raman_prior, AnchorCheck, Anchors, CalibrationReport, RowCalibration,
};
pub use sweep::{find_power_threshold, run_sweep, SweepResult, SweepRow};

use crate::decoy::evaluate;
use crate::detector::{noise_click_prob, y0_total};
use crate::error::{Error, Result};
use crate::raman::FiberSpec;
use crate::units::{ChannelRole, ItuGrid};
use crate::{
    DecoyParams, DetectorModel, NoiseBudget, OpticalChannel, PonTopology, PowerDbm as Dbm,
    RamanEfficiencyTable, RatePoint, WavelengthPlan,
};

/// Channel assignment in terms of ITU grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSpec {
    pub qkd_wavelength_nm: f64,
    pub grid: ItuGrid,
    /// Downstream channels evaluated by every sweep.
    pub ds_channels: Vec<i32>,
    pub us_channel: i32,
    pub upstream_transmitters: u32,
    /// Allowed band for data channels.
    pub band_min_thz: f64,
    pub band_max_thz: f64,
}

impl Default for PlanSpec {
    fn default() -> Self {
        PlanSpec {
            qkd_wavelength_nm: 1310.0,
            grid: ItuGrid::default(),
            ds_channels: DEFAULT_DS_CHANNELS.to_vec(),
            us_channel: DEFAULT_US_CHANNEL,
            upstream_transmitters: 1,
            band_min_thz: 190.0,
            band_max_thz: 196.0,
        }
    }
}

/// Downstream channels spanning 191.3–196.0 THz; these are also the Raman table rows.
pub const DEFAULT_DS_CHANNELS: [i32; 8] = [13, 20, 27, 34, 40, 47, 54, 60];
pub const DEFAULT_US_CHANNEL: i32 = 35;

impl PlanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.min_channel > self.grid.max_channel {
            return Err(Error::config(
                "wavelength_plan.grid_min_channel",
                "grid bounds are inverted",
            ));
        }
        if !(self.band_min_thz < self.band_max_thz) {
            return Err(Error::config(
                "wavelength_plan.band_min_thz",
                "band bounds are inverted",
            ));
        }
        if !(self.qkd_wavelength_nm > 0.0) || !self.qkd_wavelength_nm.is_finite() {
            return Err(Error::config(
                "wavelength_plan.qkd_wavelength_nm",
                "must be > 0",
            ));
        }
        if self.ds_channels.is_empty() {
            return Err(Error::config(
                "wavelength_plan.ds_channels",
                "need at least one downstream channel",
            ));
        }
        for &n in &self.ds_channels {
            self.data_channel(n, ChannelRole::Downstream, "wavelength_plan.ds_channels")?;
        }
        self.data_channel(
            self.us_channel,
            ChannelRole::Upstream,
            "wavelength_plan.us_channel",
        )?;
        Ok(())
    }

    fn data_channel(&self, n: i32, role: ChannelRole, key: &str) -> Result<OpticalChannel> {
        let f: f64 = self
            .grid
            .frequency(n)
            .map_err(|e| Error::config(key, e.to_string()))?;
        if f < self.band_min_thz || f > self.band_max_thz {
            return Err(Error::config(
                key,
                format!(
                    "channel {n} at {f} THz outside band [{}, {}] THz",
                    self.band_min_thz, self.band_max_thz
                ),
            ));
        }
        OpticalChannel::new(f, role)
    }

    /// Plan with the given downstream frequency and the configured QKD and upstream channels.
    pub fn plan_for(&self, ds_frequency_thz: f64) -> Result<WavelengthPlan> {
        let mut plan = WavelengthPlan::new(
            OpticalChannel::from_wavelength(self.qkd_wavelength_nm, ChannelRole::Qkd)?,
            OpticalChannel::new(ds_frequency_thz, ChannelRole::Downstream)?,
            self.data_channel(
                self.us_channel,
                ChannelRole::Upstream,
                "wavelength_plan.us_channel",
            )?,
        );
        plan.upstream_transmitters = self.upstream_transmitters;
        Ok(plan)
    }

    pub fn ds_frequency(&self, n: i32) -> Result<f64> {
        Ok(self
            .data_channel(n, ChannelRole::Downstream, "wavelength_plan.ds_channels")?
            .frequency_thz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    DsPower,
    UsPower,
    DsChannel,
    FeederLength,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::DsPower => "ds_power_dbm",
            SweepAxis::UsPower => "us_power_dbm",
            SweepAxis::DsChannel => "ds_channel",
            SweepAxis::FeederLength => "feeder_length_km",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        [
            Self::DsPower,
            Self::UsPower,
            Self::DsChannel,
            Self::FeederLength,
        ]
        .into_iter()
        .find(|a| a.key() == s)
    }
}

/// Grid points along the swept axis.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValues {
    /// `start, start + step, …` up to and including `stop` (1e-9 relative slack).
    Range {
        start: f64,
        stop: f64,
        step: f64,
    },
    List(Vec<f64>),
}

impl SweepValues {
    pub fn points(&self) -> Result<Vec<f64>> {
        let mut pts = match *self {
            SweepValues::Range { start, stop, step } => {
                if !(step > 0.0) || !step.is_finite() {
                    return Err(Error::config("sweep.step", "step must be > 0"));
                }
                if !start.is_finite() || !stop.is_finite() || stop < start {
                    return Err(Error::config(
                        "sweep.stop",
                        "range must be finite and non-empty",
                    ));
                }
                let count = ((stop - start) / step * (1.0 + 1e-9) + 1e-9).floor() as usize;
                (0..=count).map(|i| start + i as f64 * step).collect()
            }
            SweepValues::List(ref v) => {
                if v.is_empty() {
                    return Err(Error::config("sweep.values", "value list is empty"));
                }
                if v.iter().any(|x| x.is_nan()) {
                    return Err(Error::config("sweep.values", "NaN in value list"));
                }
                v.clone()
            }
        };
        pts.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        pts.dedup();
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: SweepValues,
    /// Downstream launch power when it is not the swept axis.
    pub ds_power_dbm: f64,
    /// Upstream launch power when it is not the swept axis.
    pub us_power_dbm: f64,
    /// Search bracket for power thresholds.
    pub threshold_min_dbm: f64,
    pub threshold_max_dbm: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            axis: SweepAxis::DsPower,
            values: SweepValues::Range {
                start: -10.0,
                stop: 9.2,
                step: 0.2,
            },
            ds_power_dbm: 0.0,
            us_power_dbm: f64::NEG_INFINITY,
            threshold_min_dbm: -40.0,
            threshold_max_dbm: 30.0,
        }
    }
}

/// Settings for the Monte Carlo cross-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    pub seed: u64,
    pub n_pulses: u64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            seed: 42,
            n_pulses: 10_000_000,
        }
    }
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: PonTopology,
    pub plan: PlanSpec,
    pub detector: DetectorModel,
    pub decoy: DecoyParams,
    pub raman: RamanEfficiencyTable,
    pub sweep: SweepSpec,
    pub oracle: OracleSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            topology: default_topology(),
            plan: PlanSpec::default(),
            detector: DetectorModel::default(),
            decoy: DecoyParams::default(),
            raman: default_raman_table(),
            sweep: SweepSpec::default(),
            oracle: OracleSpec::default(),
        }
    }
}

pub fn default_topology() -> PonTopology {
    PonTopology::new(
        FiberSpec::standard(20.0).expect("valid"),
        FiberSpec::standard(0.0).expect("valid"),
        32,
        1.0,
        1.0,
        0.0,
    )
    .expect("valid default topology")
}

/// Calibrated Raman efficiencies (1/(km·nm)) for the default scenario.
///
/// Output of [`calibrate`] on [`default_raman_prior`] with the default anchors;
/// a test checks that recalibrating reproduces these values.
pub const CALIBRATED_RAMAN_ROWS: [(f64, f64); 8] = [
    (191.3, 4.981967260721105e-13),
    (192.0, 5.572296035776799e-13),
    (192.7, 6.232574700990604e-13),
    (193.4, 6.971091836116557e-13),
    (194.0, 7.673376360001687e-13),
    (194.7, 8.582618558932848e-13),
    (195.4, 9.59959969018419e-13),
    (196.0, 1.0566686404345807e-12),
];

pub fn default_raman_table() -> RamanEfficiencyTable {
    RamanEfficiencyTable::new(CALIBRATED_RAMAN_ROWS.to_vec(), 1.0).expect("valid default table")
}

/// Everything computed at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub budget: NoiseBudget,
    pub p_noise: f64,
    pub y0: f64,
    pub eta_channel: f64,
    pub rate: RatePoint,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.plan.validate()?;
        self.detector.validate()?;
        self.decoy.validate()?;
        self.sweep.values.points()?;
        if self.sweep.axis == SweepAxis::DsChannel {
            for v in self.sweep.values.points()? {
                if v.fract() != 0.0 {
                    return Err(Error::config(
                        "sweep.values",
                        format!("channel index {v} is not an integer"),
                    ));
                }
                self.plan.ds_frequency(v as i32)?;
            }
        }
        if !(self.sweep.threshold_min_dbm < self.sweep.threshold_max_dbm)
            || !self.sweep.threshold_min_dbm.is_finite()
            || !self.sweep.threshold_max_dbm.is_finite()
        {
            return Err(Error::config(
                "sweep.threshold_min_dbm",
                "threshold bracket must be finite and non-empty",
            ));
        }
        for (key, v) in [
            ("sweep.ds_power_dbm", self.sweep.ds_power_dbm),
            ("sweep.us_power_dbm", self.sweep.us_power_dbm),
        ] {
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::config(key, "power must be finite or -inf"));
            }
        }
        Ok(())
    }

    /// Noise → background yield → decoy key rate at one operating point.
    pub fn evaluate_point(&self, ds_frequency_thz: f64, p_ds: Dbm, p_us: Dbm) -> Result<PointEval> {
        self.evaluate_with(&self.topology, &self.raman, ds_frequency_thz, p_ds, p_us)
    }

    pub(crate) fn evaluate_with(
        &self,
        topology: &PonTopology,
        raman: &RamanEfficiencyTable,
        ds_frequency_thz: f64,
        p_ds: Dbm,
        p_us: Dbm,
    ) -> Result<PointEval> {
        let plan = self.plan.plan_for(ds_frequency_thz)?;
        let lq = self.plan.qkd_wavelength_nm;
        let budget = crate::topology::noise_at_spd(topology, &plan, p_ds, p_us, raman)?;
        let p_noise = noise_click_prob(&budget, lq, &self.detector)?;
        let y0 = y0_total(&self.detector, p_noise);
        let eta_channel = crate::topology::qkd_path_transmittance(topology, lq)?;
        let rate = evaluate(eta_channel, &self.detector, y0, &self.decoy);
        Ok(PointEval {
            budget,
            p_noise,
            y0,
            eta_channel,
            rate,
        })
    }
}
