//! PON composition: feeder, 1:N splitter, drop, CWDM mux/demux.
//!
//! QKD runs upstream: pulses leave an ONU, cross the drop fiber and the
//! splitter, then the feeder, and are detected at the OLT. Downstream data
//! counter-propagates in the feeder and its backward SpRS reaches the OLT
//! without crossing the splitter. Upstream data co-propagates and its forward
//! SpRS carries exactly one splitter traversal, whether it is generated in the
//! drop (noise crosses the splitter) or in the feeder (pump crossed it).

use crate::error::{Error, Result};
use crate::raman::{
    span_loss_db, sprs_backward_mw, sprs_forward_mw, FiberSpec, RamanEfficiencyTable,
};
use crate::real::Real;
use crate::units::{
    db_to_transmittance, dbm_to_mw, ChannelRole, OpticalChannel, PowerDbm, PowerMw,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PonTopology<T> {
    pub feeder: FiberSpec<T>,
    /// Uniform per-ONU drop fiber.
    pub drop: FiberSpec<T>,
    pub split_ratio: u32,
    pub splitter_excess_db: T,
    /// Loss of one CWDM mux or demux traversal.
    pub mux_insertion_db: T,
    /// Total connector loss on the QKD path.
    pub connector_db: T,
}

impl<T: Real> PonTopology<T> {
    pub fn new(
        feeder: FiberSpec<T>,
        drop: FiberSpec<T>,
        split_ratio: u32,
        splitter_excess_db: T,
        mux_insertion_db: T,
        connector_db: T,
    ) -> Result<Self> {
        let topo = PonTopology {
            feeder,
            drop,
            split_ratio,
            splitter_excess_db,
            mux_insertion_db,
            connector_db,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.split_ratio < 2 || !self.split_ratio.is_power_of_two() {
            return Err(Error::config(
                "topology.split_ratio",
                format!(
                    "split ratio {} must be a power of two >= 2",
                    self.split_ratio
                ),
            ));
        }
        for (key, v) in [
            ("topology.splitter_excess_db", self.splitter_excess_db),
            ("topology.mux_insertion_db", self.mux_insertion_db),
            ("topology.connector_db", self.connector_db),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::config(key, format!("loss {v} dB must be >= 0")));
            }
        }
        Ok(())
    }

    /// `10·log10(N) + excess` dB.
    pub fn splitter_loss_db(&self) -> T {
        T::lit(10.0) * T::lit(f64::from(self.split_ratio)).log10() + self.splitter_excess_db
    }
}

/// Channels in use: one each of QKD, downstream and upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthPlan<T> {
    pub channels: Vec<OpticalChannel<T>>,
    /// Simultaneous upstream transmitters, summed in mW.
    pub upstream_transmitters: u32,
}

impl<T: Real> WavelengthPlan<T> {
    pub fn new(
        qkd: OpticalChannel<T>,
        downstream: OpticalChannel<T>,
        upstream: OpticalChannel<T>,
    ) -> Self {
        WavelengthPlan {
            channels: vec![qkd, downstream, upstream],
            upstream_transmitters: 1,
        }
    }

    pub fn channel(&self, role: ChannelRole) -> Result<&OpticalChannel<T>> {
        self.channels
            .iter()
            .find(|c| c.role == role)
            .ok_or_else(|| {
                Error::config("wavelength_plan", format!("plan has no {role:?} channel"))
            })
    }
}

/// SpRS noise arriving at the OLT single-photon detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseBudget<T> {
    pub backscatter_mw: PowerMw<T>,
    pub forward_us_mw: PowerMw<T>,
    pub total_mw: PowerMw<T>,
}

impl<T: Real> NoiseBudget<T> {
    pub fn new(backscatter_mw: PowerMw<T>, forward_us_mw: PowerMw<T>) -> Self {
        NoiseBudget {
            backscatter_mw,
            forward_us_mw,
            total_mw: backscatter_mw + forward_us_mw,
        }
    }
}

/// Linear transmittance of the ONU → OLT QKD path.
pub fn qkd_path_transmittance<T: Real>(topo: &PonTopology<T>, lambda_qkd_nm: T) -> Result<T> {
    let loss = span_loss_db(&topo.drop, lambda_qkd_nm)?
        + topo.splitter_loss_db()
        + span_loss_db(&topo.feeder, lambda_qkd_nm)?
        + T::lit(2.0) * topo.mux_insertion_db
        + topo.connector_db;
    Ok(db_to_transmittance(loss))
}

/// Backward SpRS from downstream data plus forward SpRS from upstream data,
/// both after one pass through the OLT-side demux.
pub fn noise_at_spd<T: Real>(
    topo: &PonTopology<T>,
    plan: &WavelengthPlan<T>,
    p_ds: PowerDbm<T>,
    p_us: PowerDbm<T>,
    raman: &RamanEfficiencyTable<T>,
) -> Result<NoiseBudget<T>> {
    let qkd = plan.channel(ChannelRole::Qkd)?;
    let ds = plan.channel(ChannelRole::Downstream)?;
    let us = plan.channel(ChannelRole::Upstream)?;
    let bw = raman.filter_bandwidth_nm;
    let demux = db_to_transmittance(topo.mux_insertion_db);
    let lq = qkd.wavelength_nm();

    let feeder_aq = topo.feeder.attenuation.natural_per_km(lq)?;
    let backscatter = sprs_backward_mw(
        dbm_to_mw(p_ds),
        raman.efficiency(ds.frequency_thz),
        bw,
        topo.feeder.length_km,
        topo.feeder.attenuation.natural_per_km(ds.wavelength_nm())?,
        feeder_aq,
    );

    let lu = us.wavelength_nm();
    let rho_us = raman.efficiency(us.frequency_thz);
    let p_us_mw = PowerMw(dbm_to_mw(p_us).0 * T::lit(f64::from(plan.upstream_transmitters)));
    let splitter = db_to_transmittance(topo.splitter_loss_db());
    let drop_noise = sprs_forward_mw(
        p_us_mw,
        rho_us,
        bw,
        topo.drop.length_km,
        topo.drop.attenuation.natural_per_km(lu)?,
        topo.drop.attenuation.natural_per_km(lq)?,
    );
    let drop_noise_at_olt =
        drop_noise.0 * splitter * db_to_transmittance(span_loss_db(&topo.feeder, lq)?);
    let pump_in_feeder =
        PowerMw(p_us_mw.0 * db_to_transmittance(span_loss_db(&topo.drop, lu)?) * splitter);
    let feeder_noise = sprs_forward_mw(
        pump_in_feeder,
        rho_us,
        bw,
        topo.feeder.length_km,
        topo.feeder.attenuation.natural_per_km(lu)?,
        feeder_aq,
    );

    Ok(NoiseBudget::new(
        PowerMw(backscatter.0 * demux),
        PowerMw((drop_noise_at_olt + feeder_noise.0) * demux),
    ))
}
