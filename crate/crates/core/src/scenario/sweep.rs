use rayon::prelude::*;

use super::{PointEval, Scenario, SweepAxis};
use crate::error::{Error, Result};
use crate::raman::FiberSpec;
use crate::units::PowerDbm;

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub ds_channel: i32,
    pub ds_frequency_thz: f64,
    pub ds_power_dbm: f64,
    pub us_power_dbm: f64,
    pub feeder_length_km: f64,
    pub point: PointEval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: Scenario,
    /// Ordered by axis value, then downstream channel.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows belonging to one downstream channel, in axis order.
    pub fn channel_rows(&self, ds_channel: i32) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.ds_channel == ds_channel)
    }
}

struct GridPoint {
    axis_value: f64,
    ds_channel: i32,
}

pub fn run_sweep(s: &Scenario) -> Result<SweepResult> {
    s.validate()?;
    let values = s.sweep.values.points()?;
    let mut channels = s.plan.ds_channels.clone();
    channels.sort_unstable();
    channels.dedup();

    let grid: Vec<GridPoint> = match s.sweep.axis {
        SweepAxis::DsChannel => values
            .iter()
            .map(|&v| GridPoint {
                axis_value: v,
                ds_channel: v as i32,
            })
            .collect(),
        _ => values
            .iter()
            .flat_map(|&v| {
                channels.iter().map(move |&n| GridPoint {
                    axis_value: v,
                    ds_channel: n,
                })
            })
            .collect(),
    };

    let rows = grid
        .par_iter()
        .map(|g| {
            evaluate_grid_point(s, g).map_err(|e| {
                Error::Runtime(format!(
                    "grid point {}={} ds_channel={}: {e}",
                    s.sweep.axis.key(),
                    g.axis_value,
                    g.ds_channel
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        scenario: s.clone(),
        rows,
    })
}

fn evaluate_grid_point(s: &Scenario, g: &GridPoint) -> Result<SweepRow> {
    let mut p_ds = s.sweep.ds_power_dbm;
    let mut p_us = s.sweep.us_power_dbm;
    let mut topology = s.topology.clone();
    match s.sweep.axis {
        SweepAxis::DsPower => p_ds = g.axis_value,
        SweepAxis::UsPower => p_us = g.axis_value,
        SweepAxis::DsChannel => {}
        SweepAxis::FeederLength => {
            topology.feeder = FiberSpec::new(g.axis_value, topology.feeder.attenuation.clone())?;
        }
    }
    let f = s.plan.ds_frequency(g.ds_channel)?;
    let point = s.evaluate_with(&topology, &s.raman, f, PowerDbm(p_ds), PowerDbm(p_us))?;
    Ok(SweepRow {
        axis_value: g.axis_value,
        ds_channel: g.ds_channel,
        ds_frequency_thz: f,
        ds_power_dbm: p_ds,
        us_power_dbm: p_us,
        feeder_length_km: topology.feeder.length_km,
        point,
    })
}

/// Resolution of the power-threshold bisection in dB.
pub const THRESHOLD_RESOLUTION_DB: f64 = 0.01;

/// Largest downstream launch power (to [`THRESHOLD_RESOLUTION_DB`]) with a
/// positive key rate on `ds_channel`.
///
/// Returns `+inf` when the rate is still positive at the top of the search
/// bracket and `-inf` when it is zero already at the bottom.
pub fn find_power_threshold(s: &Scenario, ds_channel: i32) -> Result<PowerDbm<f64>> {
    let f = s.plan.ds_frequency(ds_channel)?;
    threshold_at_frequency(s, &s.raman, f)
}

pub(crate) fn threshold_at_frequency(
    s: &Scenario,
    raman: &crate::RamanEfficiencyTable,
    ds_frequency_thz: f64,
) -> Result<PowerDbm<f64>> {
    let p_us = PowerDbm(s.sweep.us_power_dbm);
    let positive = |p: f64| -> Result<bool> {
        let e = s.evaluate_with(&s.topology, raman, ds_frequency_thz, PowerDbm(p), p_us)?;
        Ok(e.rate.r_bits_per_pulse > 0.0)
    };
    let (mut lo, mut hi) = (s.sweep.threshold_min_dbm, s.sweep.threshold_max_dbm);
    if !positive(lo)? {
        return Ok(PowerDbm(f64::NEG_INFINITY));
    }
    if positive(hi)? {
        return Ok(PowerDbm(f64::INFINITY));
    }
    while hi - lo > THRESHOLD_RESOLUTION_DB {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PowerDbm(lo))
}
