//! CSV serialization of sweep results.
//!
//! A result file starts with a `#`-prefixed preamble carrying the tool
//! version, the defaulted keys and the complete scenario, so the run can be
//! repeated from the file alone. Numbers use 9 significant digits.

use std::fmt::Write;

use crate::config::{parse_scenario, scenario_to_toml, ParsedScenario};
use crate::error::{Error, Result};
use crate::scenario::{SweepResult, SweepRow};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const BEGIN: &str = "# begin scenario";
const END: &str = "# end scenario";

pub const COLUMNS: [&str; 21] = [
    "axis_value",
    "ds_channel",
    "ds_frequency_thz",
    "ds_wavelength_nm",
    "ds_power_dbm",
    "us_power_dbm",
    "feeder_length_km",
    "backscatter_mw",
    "forward_us_mw",
    "total_noise_mw",
    "p_noise",
    "y0",
    "eta_channel",
    "q_mu",
    "e_mu",
    "q_nu",
    "e_nu",
    "y1_lower",
    "e1_upper",
    "r_bits_per_pulse",
    "skr_bps",
];

/// `x` with 9 significant digits; infinities as `inf` / `-inf`.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.8e}")
}

fn row_fields(r: &SweepRow) -> Vec<String> {
    let p = &r.point;
    let mut v = vec![fmt_sig9(r.axis_value), r.ds_channel.to_string()];
    v.extend(
        [
            r.ds_frequency_thz,
            crate::units::SPEED_OF_LIGHT_NM_THZ / r.ds_frequency_thz,
            r.ds_power_dbm,
            r.us_power_dbm,
            r.feeder_length_km,
            p.budget.backscatter_mw.0,
            p.budget.forward_us_mw.0,
            p.budget.total_mw.0,
            p.p_noise,
            p.y0,
            p.eta_channel,
            p.rate.q_mu,
            p.rate.e_mu,
            p.rate.q_nu,
            p.rate.e_nu,
            p.rate.y1_lower,
            p.rate.e1_upper,
            p.rate.r_bits_per_pulse,
            p.rate.skr_bps,
        ]
        .into_iter()
        .map(fmt_sig9),
    );
    v
}

/// Render a sweep as a self-describing CSV document.
pub fn write_csv(result: &SweepResult, defaulted: &[String]) -> String {
    let s = &result.scenario;
    let mut out = String::new();
    writeln!(out, "# qpon-sim sweep").unwrap();
    writeln!(out, "# version = {VERSION}").unwrap();
    writeln!(out, "# axis = {}", s.sweep.axis.key()).unwrap();
    writeln!(out, "# seed = {}", s.oracle.seed).unwrap();
    if defaulted.is_empty() {
        writeln!(out, "# defaulted = none").unwrap();
    } else {
        writeln!(out, "# defaulted = {}", defaulted.join(",")).unwrap();
    }
    writeln!(out, "{BEGIN}").unwrap();
    for line in scenario_to_toml(s).lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            writeln!(out, "# {line}").unwrap();
        }
    }
    writeln!(out, "{END}").unwrap();
    writeln!(out, "{}", COLUMNS.join(",")).unwrap();
    for r in &result.rows {
        writeln!(out, "{}", row_fields(r).join(",")).unwrap();
    }
    out
}

/// Recover the scenario embedded in a result file's preamble.
pub fn scenario_from_csv(text: &str) -> Result<ParsedScenario> {
    let mut lines = text.lines();
    if !lines.any(|l| l == BEGIN) {
        return Err(Error::config(
            "document",
            "no embedded scenario in result file",
        ));
    }
    let mut toml = String::new();
    for line in lines.by_ref() {
        if line == END {
            return parse_scenario(&toml);
        }
        let body = line
            .strip_prefix("# ")
            .or_else(|| line.strip_prefix('#'))
            .ok_or_else(|| Error::config("document", "embedded scenario line lacks '#' prefix"))?;
        toml.push_str(body);
        toml.push('\n');
    }
    Err(Error::config(
        "document",
        "embedded scenario is not terminated",
    ))
}
