//! Scenario files.
//!
//! A scenario is a single TOML document with the blocks `topology`,
//! `wavelength_plan`, `detector`, `decoy`, `raman`, `sweep` and `oracle`.
//! Physical units live in key names. Unknown blocks or keys are rejected;
//! missing keys take the documented defaults and are reported back.

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::raman::{AttenuationCurve, FiberSpec};
use crate::scenario::{OracleSpec, PlanSpec, Scenario, SweepAxis, SweepSpec, SweepValues};
use crate::units::ItuGrid;
use crate::{DecoyParams, DetectorModel, PonTopology, RamanEfficiencyTable};

const SECTIONS: [&str; 7] = [
    "topology",
    "wavelength_plan",
    "detector",
    "decoy",
    "raman",
    "sweep",
    "oracle",
];

/// A parsed scenario plus the key paths that were filled from defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScenario {
    pub scenario: Scenario,
    pub defaulted: Vec<String>,
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
    defaulted: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        let v = self.table.and_then(|t| t.get(key));
        if v.is_none() {
            self.defaulted.push(self.path(key));
        }
        v
    }

    fn type_err(&self, key: &str, expected: &str, v: &Value) -> Error {
        Error::config(
            self.path(key),
            format!("expected {expected}, found {}", v.type_str()),
        )
    }

    fn float(&mut self, key: &'static str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => as_float(v).ok_or_else(|| self.type_err(key, "a number", v)),
        }
    }

    /// Float restricted to `[min, max]` (either may be infinite).
    fn ranged(&mut self, key: &'static str, default: f64, min: f64, max: f64) -> Result<f64> {
        let v = self.float(key, default)?;
        if !(v >= min && v <= max) {
            return Err(Error::config(
                self.path(key),
                format!("value {v} outside [{min}, {max}]"),
            ));
        }
        Ok(v)
    }

    fn int(&mut self, key: &'static str, default: i64) -> Result<i64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) => Ok(*i),
            Some(v) => Err(self.type_err(key, "an integer", v)),
        }
    }

    fn int_ranged(&mut self, key: &'static str, default: i64, min: i64, max: i64) -> Result<i64> {
        let v = self.int(key, default)?;
        if v < min || v > max {
            return Err(Error::config(
                self.path(key),
                format!("value {v} outside [{min}, {max}]"),
            ));
        }
        Ok(v)
    }

    fn ints(&mut self, key: &'static str, default: &[i32]) -> Result<Vec<i32>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| match x {
                    Value::Integer(i) => {
                        i32::try_from(*i).map_err(|_| self.type_err(key, "32-bit integers", x))
                    }
                    other => Err(self.type_err(key, "an array of integers", other)),
                })
                .collect(),
            Some(v) => Err(self.type_err(key, "an array of integers", v)),
        }
    }

    fn floats(&mut self, key: &'static str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| as_float(x).ok_or_else(|| self.type_err(key, "an array of numbers", x)))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(self.type_err(key, "an array of numbers", v)),
        }
    }

    fn pairs(&mut self, key: &'static str, default: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| match x {
                    Value::Array(p) if p.len() == 2 => match (as_float(&p[0]), as_float(&p[1])) {
                        (Some(a), Some(b)) => Ok((a, b)),
                        _ => Err(self.type_err(key, "pairs of numbers", x)),
                    },
                    other => Err(self.type_err(key, "an array of [number, number] pairs", other)),
                })
                .collect(),
            Some(v) => Err(self.type_err(key, "an array of [number, number] pairs", v)),
        }
    }

    fn string(&mut self, key: &'static str, default: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(self.type_err(key, "a string", v)),
        }
    }

    fn u64_value(&mut self, key: &'static str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(Value::String(s)) => s.parse::<u64>().map_err(|_| {
                Error::config(
                    self.path(key),
                    format!("{s:?} is not an unsigned 64-bit integer"),
                )
            }),
            Some(v) => Err(self.type_err(key, "a non-negative integer", v)),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.used.contains(&k.as_str()) {
                    return Err(Error::config(self.path(k), "unknown key"));
                }
            }
        }
        Ok(())
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn wrap(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

/// Parse a scenario document, applying defaults for every missing key.
pub fn parse_scenario(text: &str) -> Result<ParsedScenario> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| {
        let msg = e.message().replace('\n', " ");
        let at = e
            .span()
            .map(|s| line_of(text, s.start))
            .map(|l| format!(" (line {l})"))
            .unwrap_or_default();
        Error::config("document", format!("{msg}{at}"))
    })?;
    for (k, v) in &doc {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(Error::config(k.clone(), "unknown block"));
        }
        if !v.is_table() {
            return Err(Error::config(
                k.clone(),
                format!("expected a block, found {}", v.type_str()),
            ));
        }
    }
    let mut defaulted = Vec::new();

    let d = Scenario::default();
    let table_of = |name: &str| doc.get(name).and_then(Value::as_table);

    // topology
    let mut s = Section {
        name: "topology",
        table: table_of("topology"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let curve_points = s.pairs(
        "attenuation_curve_nm_db_per_km",
        d.topology.feeder.attenuation.points().to_vec(),
    )?;
    let curve = AttenuationCurve::new(curve_points)
        .map_err(wrap("topology.attenuation_curve_nm_db_per_km"))?;
    let feeder_km = s.ranged(
        "feeder_length_km",
        d.topology.feeder.length_km,
        0.0,
        f64::MAX,
    )?;
    let drop_km = s.ranged("drop_length_km", d.topology.drop.length_km, 0.0, f64::MAX)?;
    let split = s.int_ranged("split_ratio", i64::from(d.topology.split_ratio), 2, 1 << 20)?;
    let excess = s.ranged(
        "splitter_excess_db",
        d.topology.splitter_excess_db,
        0.0,
        f64::MAX,
    )?;
    let mux = s.ranged(
        "mux_insertion_db",
        d.topology.mux_insertion_db,
        0.0,
        f64::MAX,
    )?;
    let conn = s.ranged("connector_db", d.topology.connector_db, 0.0, f64::MAX)?;
    s.finish()?;
    let topology = PonTopology::new(
        FiberSpec::new(feeder_km, curve.clone())?,
        FiberSpec::new(drop_km, curve)?,
        split as u32,
        excess,
        mux,
        conn,
    )?;

    // wavelength plan
    let mut s = Section {
        name: "wavelength_plan",
        table: table_of("wavelength_plan"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let plan = PlanSpec {
        qkd_wavelength_nm: s.ranged(
            "qkd_wavelength_nm",
            d.plan.qkd_wavelength_nm,
            1260.0,
            1625.0,
        )?,
        grid: ItuGrid {
            min_channel: s.int_ranged(
                "grid_min_channel",
                i64::from(d.plan.grid.min_channel),
                -1000,
                1000,
            )? as i32,
            max_channel: s.int_ranged(
                "grid_max_channel",
                i64::from(d.plan.grid.max_channel),
                -1000,
                1000,
            )? as i32,
        },
        ds_channels: s.ints("ds_channels", &d.plan.ds_channels)?,
        us_channel: s.int_ranged("us_channel", i64::from(d.plan.us_channel), -1000, 1000)? as i32,
        upstream_transmitters: s.int_ranged(
            "upstream_transmitters",
            i64::from(d.plan.upstream_transmitters),
            1,
            1 << 16,
        )? as u32,
        band_min_thz: s.ranged("band_min_thz", d.plan.band_min_thz, 0.0, f64::MAX)?,
        band_max_thz: s.ranged("band_max_thz", d.plan.band_max_thz, 0.0, f64::MAX)?,
    };
    s.finish()?;

    // detector
    let mut s = Section {
        name: "detector",
        table: table_of("detector"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let detector = DetectorModel {
        efficiency: s.ranged("efficiency", d.detector.efficiency, 0.0, 1.0)?,
        dark_prob: s.ranged("dark_prob_per_gate", d.detector.dark_prob, 0.0, 1.0)?,
        gate_width_ns: s.ranged(
            "gate_width_ns",
            d.detector.gate_width_ns,
            f64::MIN_POSITIVE,
            f64::MAX,
        )?,
        pulse_rate_hz: s.ranged(
            "pulse_rate_hz",
            d.detector.pulse_rate_hz,
            f64::MIN_POSITIVE,
            f64::MAX,
        )?,
        num_detectors: s.int_ranged("num_detectors", i64::from(d.detector.num_detectors), 1, 64)?
            as u32,
    };
    s.finish()?;

    // decoy
    let mut s = Section {
        name: "decoy",
        table: table_of("decoy"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let decoy = DecoyParams {
        mu: s.ranged(
            "signal_mean_photons",
            d.decoy.mu,
            f64::MIN_POSITIVE,
            f64::MAX,
        )?,
        nu: s.ranged(
            "decoy_mean_photons",
            d.decoy.nu,
            f64::MIN_POSITIVE,
            f64::MAX,
        )?,
        e_d: s.ranged("misalignment_error", d.decoy.e_d, 0.0, 0.5)?,
        q_sift: s.ranged("sift_factor", d.decoy.q_sift, f64::MIN_POSITIVE, 1.0)?,
        f_ec: s.ranged("error_correction_inefficiency", d.decoy.f_ec, 1.0, f64::MAX)?,
        e0: s.ranged("background_error", d.decoy.e0, 0.0, 1.0)?,
    };
    s.finish()?;

    // raman
    let mut s = Section {
        name: "raman",
        table: table_of("raman"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let bw = s.ranged(
        "filter_bandwidth_nm",
        d.raman.filter_bandwidth_nm,
        f64::MIN_POSITIVE,
        f64::MAX,
    )?;
    let rows = s.pairs("efficiency_thz_per_km_nm", d.raman.rows().to_vec())?;
    s.finish()?;
    let raman =
        RamanEfficiencyTable::new(rows, bw).map_err(wrap("raman.efficiency_thz_per_km_nm"))?;
    if !raman.is_monotone() {
        return Err(Error::config(
            "raman.efficiency_thz_per_km_nm",
            "efficiency must not increase toward lower pump frequency",
        ));
    }

    // sweep
    let mut s = Section {
        name: "sweep",
        table: table_of("sweep"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let axis_key = s.string("axis", d.sweep.axis.key())?;
    let axis = SweepAxis::from_key(&axis_key).ok_or_else(|| {
        Error::config("sweep.axis", format!("unknown axis {axis_key:?}; expected ds_power_dbm, us_power_dbm, ds_channel or feeder_length_km"))
    })?;
    let sweep_table = table_of("sweep");
    let has = |k: &str| sweep_table.is_some_and(|t| t.contains_key(k));
    let values = if has("values") {
        if ["start", "stop", "step"].iter().any(|k| has(k)) {
            return Err(Error::config(
                "sweep.values",
                "give either values or start/stop/step, not both",
            ));
        }
        SweepValues::List(s.floats("values")?.expect("present"))
    } else {
        s.used.push("values");
        let SweepValues::Range { start, stop, step } = d.sweep.values else {
            unreachable!("default sweep is a range")
        };
        SweepValues::Range {
            start: s.float("start", start)?,
            stop: s.float("stop", stop)?,
            step: s.float("step", step)?,
        }
    };
    let sweep = SweepSpec {
        axis,
        values,
        ds_power_dbm: s.float("ds_power_dbm", d.sweep.ds_power_dbm)?,
        us_power_dbm: s.float("us_power_dbm", d.sweep.us_power_dbm)?,
        threshold_min_dbm: s.float("threshold_min_dbm", d.sweep.threshold_min_dbm)?,
        threshold_max_dbm: s.float("threshold_max_dbm", d.sweep.threshold_max_dbm)?,
    };
    s.finish()?;

    // oracle
    let mut s = Section {
        name: "oracle",
        table: table_of("oracle"),
        used: vec![],
        defaulted: &mut defaulted,
    };
    let oracle = OracleSpec {
        seed: s.u64_value("seed", d.oracle.seed)?,
        n_pulses: s.u64_value("n_pulses", d.oracle.n_pulses)?,
    };
    s.finish()?;

    let scenario = Scenario {
        topology,
        plan,
        detector,
        decoy,
        raman,
        sweep,
        oracle,
    };
    scenario.validate()?;
    Ok(ParsedScenario {
        scenario,
        defaulted,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn pairs_value(pairs: &[(f64, f64)]) -> Value {
    Value::Array(
        pairs
            .iter()
            .map(|&(a, b)| Value::Array(vec![Value::Float(a), Value::Float(b)]))
            .collect(),
    )
}

fn u64_value(v: u64) -> Value {
    match i64::try_from(v) {
        Ok(i) => Value::Integer(i),
        Err(_) => Value::String(v.to_string()),
    }
}

/// Render a scenario with every key explicit. Parsing the output yields an
/// identical [`Scenario`] and no defaulted keys.
pub fn scenario_to_toml(s: &Scenario) -> String {
    let mut doc = Table::new();
    let mut t = Table::new();
    t.insert(
        "feeder_length_km".into(),
        Value::Float(s.topology.feeder.length_km),
    );
    t.insert(
        "drop_length_km".into(),
        Value::Float(s.topology.drop.length_km),
    );
    t.insert(
        "split_ratio".into(),
        Value::Integer(i64::from(s.topology.split_ratio)),
    );
    t.insert(
        "splitter_excess_db".into(),
        Value::Float(s.topology.splitter_excess_db),
    );
    t.insert(
        "mux_insertion_db".into(),
        Value::Float(s.topology.mux_insertion_db),
    );
    t.insert("connector_db".into(), Value::Float(s.topology.connector_db));
    t.insert(
        "attenuation_curve_nm_db_per_km".into(),
        pairs_value(s.topology.feeder.attenuation.points()),
    );
    doc.insert("topology".into(), Value::Table(t));

    let p = &s.plan;
    let mut t = Table::new();
    t.insert(
        "qkd_wavelength_nm".into(),
        Value::Float(p.qkd_wavelength_nm),
    );
    t.insert(
        "grid_min_channel".into(),
        Value::Integer(i64::from(p.grid.min_channel)),
    );
    t.insert(
        "grid_max_channel".into(),
        Value::Integer(i64::from(p.grid.max_channel)),
    );
    t.insert(
        "ds_channels".into(),
        Value::Array(
            p.ds_channels
                .iter()
                .map(|&n| Value::Integer(i64::from(n)))
                .collect(),
        ),
    );
    t.insert("us_channel".into(), Value::Integer(i64::from(p.us_channel)));
    t.insert(
        "upstream_transmitters".into(),
        Value::Integer(i64::from(p.upstream_transmitters)),
    );
    t.insert("band_min_thz".into(), Value::Float(p.band_min_thz));
    t.insert("band_max_thz".into(), Value::Float(p.band_max_thz));
    doc.insert("wavelength_plan".into(), Value::Table(t));

    let det = &s.detector;
    let mut t = Table::new();
    t.insert("efficiency".into(), Value::Float(det.efficiency));
    t.insert("dark_prob_per_gate".into(), Value::Float(det.dark_prob));
    t.insert("gate_width_ns".into(), Value::Float(det.gate_width_ns));
    t.insert("pulse_rate_hz".into(), Value::Float(det.pulse_rate_hz));
    t.insert(
        "num_detectors".into(),
        Value::Integer(i64::from(det.num_detectors)),
    );
    doc.insert("detector".into(), Value::Table(t));

    let dp = &s.decoy;
    let mut t = Table::new();
    t.insert("signal_mean_photons".into(), Value::Float(dp.mu));
    t.insert("decoy_mean_photons".into(), Value::Float(dp.nu));
    t.insert("misalignment_error".into(), Value::Float(dp.e_d));
    t.insert("sift_factor".into(), Value::Float(dp.q_sift));
    t.insert(
        "error_correction_inefficiency".into(),
        Value::Float(dp.f_ec),
    );
    t.insert("background_error".into(), Value::Float(dp.e0));
    doc.insert("decoy".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert(
        "filter_bandwidth_nm".into(),
        Value::Float(s.raman.filter_bandwidth_nm),
    );
    t.insert(
        "efficiency_thz_per_km_nm".into(),
        pairs_value(s.raman.rows()),
    );
    doc.insert("raman".into(), Value::Table(t));

    let sw = &s.sweep;
    let mut t = Table::new();
    t.insert("axis".into(), Value::String(sw.axis.key().into()));
    match &sw.values {
        SweepValues::Range { start, stop, step } => {
            t.insert("start".into(), Value::Float(*start));
            t.insert("stop".into(), Value::Float(*stop));
            t.insert("step".into(), Value::Float(*step));
        }
        SweepValues::List(v) => {
            t.insert(
                "values".into(),
                Value::Array(v.iter().map(|&x| Value::Float(x)).collect()),
            );
        }
    }
    t.insert("ds_power_dbm".into(), Value::Float(sw.ds_power_dbm));
    t.insert("us_power_dbm".into(), Value::Float(sw.us_power_dbm));
    t.insert(
        "threshold_min_dbm".into(),
        Value::Float(sw.threshold_min_dbm),
    );
    t.insert(
        "threshold_max_dbm".into(),
        Value::Float(sw.threshold_max_dbm),
    );
    doc.insert("sweep".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("seed".into(), u64_value(s.oracle.seed));
    t.insert("n_pulses".into(), u64_value(s.oracle.n_pulses));
    doc.insert("oracle".into(), Value::Table(t));

    toml::to_string(&doc).expect("scenario tables serialize")
}

/// Serialize a Raman table as a standalone `[raman]` block.
pub fn raman_to_toml(table: &RamanEfficiencyTable) -> String {
    let mut t = Table::new();
    t.insert(
        "filter_bandwidth_nm".into(),
        Value::Float(table.filter_bandwidth_nm),
    );
    t.insert("efficiency_thz_per_km_nm".into(), pairs_value(table.rows()));
    let mut doc = Table::new();
    doc.insert("raman".into(), Value::Table(t));
    toml::to_string(&doc).expect("raman table serializes")
}
