//! Fit the Raman efficiency table to key-rate anchors.
//!
//! Each table row is handled independently: with the downstream channel at the
//! row frequency and upstream off, bisection on `log10 ρ` finds the largest
//! efficiency for which every hard anchor still holds. The input table is then
//! scaled down uniformly until no row exceeds its ceiling (never up, so a table
//! that already satisfies the anchors is returned unchanged), and a final
//! isotonic pass makes `ρ` non-increasing toward lower pump frequency.

use super::sweep::threshold_at_frequency;
use super::Scenario;
use crate::error::{Error, Result};
use crate::units::{PowerDbm, PLANCK_J_S};
use crate::RamanEfficiencyTable;

const BOLTZMANN_J_K: f64 = 1.380_649e-23;

/// Key-rate targets the calibrated table must meet.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    /// Power at which every channel must reach `min_rate_bits_per_pulse`.
    pub reference_power_dbm: f64,
    pub min_rate_bits_per_pulse: f64,
    /// Every channel must keep a positive rate at this power.
    pub all_channels_power_dbm: f64,
    /// Channels at or below this ITU index's frequency must keep a positive
    /// rate up to `long_wavelength_power_dbm`.
    pub long_wavelength_channel: i32,
    pub long_wavelength_power_dbm: f64,
    /// Soft: the highest-frequency row should have lost its key at this power.
    pub shortest_fails_at_dbm: Option<f64>,
    /// Headroom applied to every ceiling, in dB of Raman efficiency.
    pub margin_db: f64,
}

impl Default for Anchors {
    fn default() -> Self {
        Anchors {
            reference_power_dbm: 0.0,
            min_rate_bits_per_pulse: 7e-6,
            all_channels_power_dbm: 3.2,
            long_wavelength_channel: 13,
            long_wavelength_power_dbm: 9.2,
            shortest_fails_at_dbm: Some(9.2),
            margin_db: 1.0,
        }
    }
}

impl Anchors {
    /// Anchors that any physically sensible table satisfies.
    pub fn loose() -> Self {
        Anchors {
            reference_power_dbm: -100.0,
            min_rate_bits_per_pulse: 0.0,
            all_channels_power_dbm: -100.0,
            long_wavelength_power_dbm: -100.0,
            shortest_fails_at_dbm: None,
            margin_db: 0.0,
            ..Anchors::default()
        }
    }
}

/// Outcome of one anchor on the calibrated table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCheck {
    pub name: String,
    pub frequency_thz: f64,
    pub hard: bool,
    pub satisfied: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowCalibration {
    pub frequency_thz: f64,
    pub input_rho: f64,
    /// Largest feasible efficiency after margin; `inf` when unconstrained.
    pub ceiling_rho: f64,
    pub output_rho: f64,
    pub threshold_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub table: RamanEfficiencyTable,
    pub scale: f64,
    /// Row whose ceiling fixed the scale, if any constrained it.
    pub binding_frequency_thz: Option<f64>,
    pub rows: Vec<RowCalibration>,
    pub checks: Vec<AnchorCheck>,
    pub warnings: Vec<String>,
}

impl CalibrationReport {
    pub fn all_hard_satisfied(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.satisfied)
    }
}

/// Uncalibrated spectral shape: thermal anti-Stokes weighting of a 5e-9
/// (km·nm)⁻¹ efficiency at 196 THz, evaluated at the default row frequencies.
pub fn default_raman_prior(qkd_wavelength_nm: f64) -> RamanEfficiencyTable {
    let f_qkd = crate::units::SPEED_OF_LIGHT_NM_THZ / qkd_wavelength_nm;
    let per_thz = PLANCK_J_S * 1e12 / (BOLTZMANN_J_K * 300.0);
    let rows = super::CALIBRATED_RAMAN_ROWS
        .iter()
        .map(|&(f, _)| (f, 5e-9 * (-per_thz * ((f_qkd - f) - (f_qkd - 196.0))).exp()))
        .collect();
    RamanEfficiencyTable::new(rows, 1.0).expect("valid prior")
}

struct RowAnchor {
    name: &'static str,
    power_dbm: f64,
    min_rate: f64,
    strict: bool,
}

fn row_anchors(a: &Anchors, long_limit_thz: f64, f: f64) -> Vec<RowAnchor> {
    let mut v = vec![
        RowAnchor {
            name: "min_rate_at_reference_power",
            power_dbm: a.reference_power_dbm,
            min_rate: a.min_rate_bits_per_pulse,
            strict: false,
        },
        RowAnchor {
            name: "positive_rate_all_channels",
            power_dbm: a.all_channels_power_dbm,
            min_rate: 0.0,
            strict: true,
        },
    ];
    if f <= long_limit_thz + 1e-9 {
        v.push(RowAnchor {
            name: "positive_rate_long_wavelength",
            power_dbm: a.long_wavelength_power_dbm,
            min_rate: 0.0,
            strict: true,
        });
    }
    v
}

fn rate_at(s: &Scenario, table: &RamanEfficiencyTable, f: f64, p_dbm: f64) -> Result<f64> {
    Ok(
        s.evaluate_with(&s.topology, table, f, PowerDbm(p_dbm), PowerDbm::off())?
            .rate
            .r_bits_per_pulse,
    )
}

fn anchor_holds(s: &Scenario, table: &RamanEfficiencyTable, f: f64, a: &RowAnchor) -> Result<bool> {
    let r = rate_at(s, table, f, a.power_dbm)?;
    Ok(if a.strict {
        r > a.min_rate
    } else {
        r >= a.min_rate
    })
}

fn single_row(f: f64, rho: f64, bw: f64) -> Result<RamanEfficiencyTable> {
    RamanEfficiencyTable::new(vec![(f, rho)], bw)
}

/// Largest `ρ` at frequency `f` satisfying every anchor, before margin.
fn ceiling(s: &Scenario, anchors: &[RowAnchor], f: f64, bw: f64) -> Result<f64> {
    let feasible = |log_rho: f64| -> Result<Option<&'static str>> {
        let t = single_row(f, 10f64.powf(log_rho), bw)?;
        for a in anchors {
            if !anchor_holds(s, &t, f, a)? {
                return Ok(Some(a.name));
            }
        }
        Ok(None)
    };
    let (mut lo, mut hi) = (-30.0, 0.0);
    if let Some(name) = feasible(lo)? {
        return Err(Error::Runtime(format!(
            "calibration infeasible: anchor {name} fails at {f} THz even without Raman noise (binding constraint is detector/decoy performance)"
        )));
    }
    if feasible(hi)?.is_none() {
        return Ok(f64::INFINITY);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid)?.is_none() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(10f64.powf(lo))
}

/// Calibrate `s.raman` against `anchors`. Idempotent on its own output.
pub fn calibrate(s: &Scenario, anchors: &Anchors) -> Result<CalibrationReport> {
    s.validate()?;
    if !(anchors.margin_db >= 0.0) {
        return Err(Error::config(
            "calibration.margin_db",
            "margin must be >= 0 dB",
        ));
    }
    let long_limit = s
        .plan
        .grid
        .frequency::<f64>(anchors.long_wavelength_channel)?;
    let bw = s.raman.filter_bandwidth_nm;
    let margin = 10f64.powf(-anchors.margin_db / 10.0);

    let mut ceilings = Vec::with_capacity(s.raman.rows().len());
    for &(f, _) in s.raman.rows() {
        let c = ceiling(s, &row_anchors(anchors, long_limit, f), f, bw)?;
        ceilings.push(c * margin);
    }

    let mut scale = 1.0_f64;
    let mut binding = None;
    for (&(f, rho), &c) in s.raman.rows().iter().zip(&ceilings) {
        if c / rho < scale {
            scale = c / rho;
            binding = Some(f);
        }
    }
    // A table that already sits on its ceilings comes back unchanged.
    if scale > 1.0 - 1e-12 {
        scale = 1.0;
        binding = None;
    }
    let mut rows: Vec<(f64, f64)> = s
        .raman
        .rows()
        .iter()
        .map(|&(f, rho)| (f, rho * scale))
        .collect();
    for i in (0..rows.len().saturating_sub(1)).rev() {
        rows[i].1 = rows[i].1.min(rows[i + 1].1);
    }
    let table = RamanEfficiencyTable::new(rows, bw)?;

    let mut report_rows = Vec::new();
    let mut checks = Vec::new();
    for ((&(f, input), &c), &(_, out)) in s.raman.rows().iter().zip(&ceilings).zip(table.rows()) {
        report_rows.push(RowCalibration {
            frequency_thz: f,
            input_rho: input,
            ceiling_rho: c,
            output_rho: out,
            threshold_dbm: threshold_at_frequency(s, &table, f)?.0,
        });
        for a in row_anchors(anchors, long_limit, f) {
            let r = rate_at(s, &table, f, a.power_dbm)?;
            let satisfied = anchor_holds(s, &table, f, &a)?;
            checks.push(AnchorCheck {
                name: a.name.to_string(),
                frequency_thz: f,
                hard: true,
                satisfied,
                detail: format!(
                    "r({} dBm) = {r:.9e} bits/pulse, required {} {}",
                    a.power_dbm,
                    if a.strict { ">" } else { ">=" },
                    a.min_rate
                ),
            });
        }
    }

    let mut warnings = Vec::new();
    if let (Some(p), Some(&(f, _))) = (anchors.shortest_fails_at_dbm, table.rows().last()) {
        let r = rate_at(s, &table, f, p)?;
        let satisfied = r == 0.0;
        if !satisfied {
            warnings.push(format!(
                "soft anchor: highest-frequency row {f} THz still has r = {r:.3e} bits/pulse at {p} dBm"
            ));
        }
        checks.push(AnchorCheck {
            name: "shortest_wavelength_fails".to_string(),
            frequency_thz: f,
            hard: false,
            satisfied,
            detail: format!("r({p} dBm) = {r:.9e} bits/pulse, expected 0"),
        });
    }

    Ok(CalibrationReport {
        table,
        scale,
        binding_frequency_thz: binding,
        rows: report_rows,
        checks,
        warnings,
    })
}
