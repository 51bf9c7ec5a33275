//! Exit criteria for the simulator. Each test writes one `PASS`/`FAIL` line to
//! stdout (bypassing the harness capture) before asserting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use qpon_core::config::parse_scenario;
use qpon_core::decoy::{decoy_bounds, gain_and_qber, h2};
use qpon_core::oracle::{run_oracle, OracleConfig};
use qpon_core::raman::{sprs_backward_mw, sprs_forward_mw};
use qpon_core::report::write_csv;
use qpon_core::scenario::{run_sweep, SweepAxis, SweepValues};
use qpon_core::units::{dbm_to_mw, mw_to_dbm, PowerDbm, PowerMw};
use qpon_core::{DecoyParams, DetectorModel, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MIN_RATE_BITS_PER_PULSE: f64 = 7e-6;
const MIN_SKR_BPS: f64 = 175.0;
const US_RELATIVE_CHANGE: f64 = 0.05;
const ORACLE_SIGMAS: f64 = 3.0;
const ORACLE_SETS: usize = 20;
const ORACLE_PULSES: u64 = 10_000_000;
const QUADRATURE_STEPS: usize = 10_000;
const QUADRATURE_REL_TOL: f64 = 1e-3;
const ROUND_TRIP_TOL: f64 = 1e-12;

fn report(
    id: &str,
    name: &str,
    ok: bool,
    elapsed: Duration,
    budget: Duration,
    detail: &str,
) -> bool {
    let ok = ok && elapsed < budget;
    let line = format!(
        "[{}] criterion {id} {name}: {detail} ({:.2} s, budget {} s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    ok
}

fn scenario_file(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scenario(&text)
        .expect("shipped scenario parses")
        .scenario
}

/// Every grid channel inside the configured data band, highest frequency last.
fn band_channels(s: &Scenario) -> Vec<(i32, f64)> {
    (s.plan.grid.min_channel..=s.plan.grid.max_channel)
        .filter_map(|n| s.plan.ds_frequency(n).ok().map(|f| (n, f)))
        .collect()
}

#[test]
fn criterion_1_key_rate_thresholds() {
    let start = Instant::now();
    let s = scenario_file("paper_fig2cd.scenario");
    let off = PowerDbm(f64::NEG_INFINITY);
    let long_wl_f = s.plan.ds_frequency(13).unwrap();
    let mut failures = Vec::new();
    let mut worst_reference = f64::INFINITY;
    for (n, f) in band_channels(&s) {
        let at_ref = s.evaluate_point(f, PowerDbm(0.0), off).unwrap().rate;
        worst_reference = worst_reference.min(at_ref.r_bits_per_pulse);
        if !(at_ref.r_bits_per_pulse >= MIN_RATE_BITS_PER_PULSE && at_ref.skr_bps >= MIN_SKR_BPS) {
            failures.push(format!("ch{n} r(0 dBm) = {:e}", at_ref.r_bits_per_pulse));
        }
        let at_all = s.evaluate_point(f, PowerDbm(3.2), off).unwrap().rate;
        if !(at_all.r_bits_per_pulse > 0.0) {
            failures.push(format!("ch{n} r(3.2 dBm) = 0"));
        }
        if f <= long_wl_f {
            let at_high = s.evaluate_point(f, PowerDbm(9.2), off).unwrap().rate;
            if !(at_high.r_bits_per_pulse > 0.0) {
                failures.push(format!("ch{n} r(9.2 dBm) = 0"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("all band channels meet the rate floors, worst r(0 dBm) = {worst_reference:.3e}")
    } else {
        failures.join("; ")
    };
    let ok = report(
        "1",
        "key-rate thresholds",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(10),
        &detail,
    );
    assert!(ok, "{detail}");
}

#[test]
fn criterion_2_upstream_negligible() {
    let start = Instant::now();
    let base = scenario_file("paper_fig2cd.scenario");
    let with_us = scenario_file("paper_fig2ef.scenario");
    assert_eq!(with_us.sweep.us_power_dbm, 3.2);
    let a = run_sweep(&base).unwrap();
    let b = run_sweep(&with_us).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());

    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    let mut changed = 0;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(
            (ra.axis_value, ra.ds_channel),
            (rb.axis_value, rb.ds_channel)
        );
        let (x, y) = (ra.point.rate.skr_bps, rb.point.rate.skr_bps);
        let rel = if x == 0.0 && y == 0.0 {
            0.0
        } else {
            (x - y).abs() / x.abs().max(y.abs())
        };
        if rel >= US_RELATIVE_CHANGE {
            changed += 1;
        }
        if rel > worst {
            worst = rel;
            worst_at = format!("ch{} at {:.1} dBm", ra.ds_channel, ra.axis_value);
        }
    }
    let skr_ok = changed == 0;

    let fwd = scenario_file("paper_fig2b.scenario");
    assert_eq!(fwd.sweep.axis, SweepAxis::UsPower);
    let floor = fwd.detector.dark_floor();
    let us_rows = run_sweep(&fwd).unwrap();
    let max_noise = us_rows
        .rows
        .iter()
        .filter(|r| r.us_power_dbm <= 3.2)
        .map(|r| r.point.p_noise)
        .fold(0.0_f64, f64::max);
    let noise_ok = max_noise < floor
        && us_rows
            .rows
            .iter()
            .any(|r| (r.us_power_dbm - 3.2).abs() < 1e-9);

    let detail = format!(
        "{changed}/{} SKR rows change by >= 5% (worst {worst:.3} at {worst_at}); \
         max forward p_noise {max_noise:.3e} vs dark floor {floor:.1e}",
        a.rows.len()
    );
    let ok = report(
        "2",
        "upstream noise negligible",
        skr_ok && noise_ok,
        start.elapsed(),
        Duration::from_secs(10),
        &detail,
    );
    assert!(ok, "{detail}");
}

#[test]
fn criterion_3_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut failures = Vec::new();
    let mut worst_sigma = 0.0_f64;
    for set in 0..ORACLE_SETS {
        let eta = 10f64.powf(rng.random_range(-3.0..(0.2f64).log10()));
        let mu = rng.random_range(0.2..0.8);
        let nu = rng.random_range(0.05..0.5 * mu);
        let cfg = OracleConfig {
            n_pulses: ORACLE_PULSES,
            seed: 1000 + set as u64,
            intensity: mu,
            eta,
            p_dark: 10f64.powf(rng.random_range(-7.0..(5e-6f64).log10())),
            num_detectors: 4,
            p_noise: rng.random_range(0.0..2e-5),
            e_d: rng.random_range(0.0..0.05),
        };
        let det = DetectorModel {
            efficiency: 1.0,
            dark_prob: cfg.p_dark,
            num_detectors: cfg.num_detectors,
            ..DetectorModel::default()
        };
        let params = DecoyParams {
            mu,
            nu,
            e_d: cfg.e_d,
            ..DecoyParams::default()
        };
        let y0 = cfg.background_yield();
        let (q_mu, e_mu) = gain_and_qber(eta, &det, y0, mu, &params);
        let (q_nu, e_nu) = gain_and_qber(eta, &det, y0, nu, &params);
        let (y1_lower, e1_upper) = decoy_bounds(q_mu, e_mu, q_nu, e_nu, y0, &params);

        let tally = run_oracle(&cfg).unwrap();
        let (gain, gain_se) = tally.gain();
        let (qber, qber_se) = tally.qber();
        let (y1, y1_se) = tally.yield_n(1);
        let (e1, e1_se) = tally.error_n(1);

        let z_gain = (gain - q_mu).abs() / gain_se;
        let z_qber = (qber - e_mu).abs() / qber_se;
        worst_sigma = worst_sigma.max(z_gain).max(z_qber);
        if !(z_gain <= ORACLE_SIGMAS) {
            failures.push(format!("set {set}: gain off by {z_gain:.2} sigma"));
        }
        if !(z_qber <= ORACLE_SIGMAS) {
            failures.push(format!("set {set}: qber off by {z_qber:.2} sigma"));
        }
        if !(y1_lower <= y1 + ORACLE_SIGMAS * y1_se) {
            failures.push(format!(
                "set {set}: Y1 lower {y1_lower:e} above empirical {y1:e}"
            ));
        }
        if !(e1_upper >= e1 - ORACLE_SIGMAS * e1_se) {
            failures.push(format!(
                "set {set}: e1 upper {e1_upper:e} below empirical {e1:e}"
            ));
        }
    }
    let detail = if failures.is_empty() {
        format!("{ORACLE_SETS} sets at {ORACLE_PULSES} pulses, worst deviation {worst_sigma:.2} sigma, bounds sound")
    } else {
        failures.join("; ")
    };
    let ok = report(
        "3",
        "Monte Carlo oracle agreement",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(120),
        &detail,
    );
    assert!(ok, "{detail}");
}

/// Trapezoid rule over the fiber of the local scattering source times the
/// attenuation seen on the way to the observation end.
fn trapezoid(length: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = length / QUADRATURE_STEPS as f64;
    let inner: f64 = (1..QUADRATURE_STEPS).map(|i| f(i as f64 * h)).sum();
    h * (0.5 * (f(0.0) + f(length)) + inner)
}

#[test]
fn criterion_4_closed_form_vs_quadrature() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let length = rng.random_range(0.5..60.0);
        for _ in 0..10 {
            let a_p = rng.random_range(0.15..0.5) / (10.0 / std::f64::consts::LN_10);
            let a_q = rng.random_range(0.15..0.5) / (10.0 / std::f64::consts::LN_10);
            let p = rng.random_range(0.01..10.0);
            let rho = 10f64.powf(rng.random_range(-13.0..-8.0));
            let bw = rng.random_range(0.1..2.0);
            let scale = p * rho * bw;
            let fwd = sprs_forward_mw(PowerMw(p), rho, bw, length, a_p, a_q).0;
            let fwd_q = trapezoid(length, |z| {
                scale * (-a_p * z).exp() * (-a_q * (length - z)).exp()
            });
            let bwd = sprs_backward_mw(PowerMw(p), rho, bw, length, a_p, a_q).0;
            let bwd_q = trapezoid(length, |z| scale * (-a_p * z).exp() * (-a_q * z).exp());
            worst = worst
                .max((fwd - fwd_q).abs() / fwd_q)
                .max((bwd - bwd_q).abs() / bwd_q);
        }
    }
    let detail = format!("worst relative deviation {worst:.2e} over 100 points");
    let ok = report(
        "4",
        "SpRS closed forms vs quadrature",
        worst < QUADRATURE_REL_TOL,
        start.elapsed(),
        Duration::from_secs(5),
        &detail,
    );
    assert!(ok, "{detail}");
}

fn csv_with_threads(s: &Scenario, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| write_csv(&run_sweep(s).unwrap(), &[]))
}

#[test]
fn criterion_5_property_suite() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);

    // Binary entropy.
    if h2(0.0f64).unwrap() != 0.0
        || h2(1.0f64).unwrap() != 0.0
        || (h2(0.5f64).unwrap() - 1.0).abs() > 1e-15
    {
        failures.push("h2 boundary values".to_string());
    }
    if h2(-1e-9f64).is_ok() || h2(1.0f64 + 1e-9).is_ok() {
        failures.push("h2 accepts out-of-range input".to_string());
    }
    for _ in 0..10_000 {
        let x: f64 = rng.random_range(0.0..=1.0);
        if (h2(x).unwrap() - h2(1.0 - x).unwrap()).abs() > 1e-12 {
            failures.push(format!("h2 asymmetric at {x}"));
            break;
        }
    }

    // dBm round trip.
    for _ in 0..10_000 {
        let p: f64 = rng.random_range(-60.0..30.0);
        let back = mw_to_dbm(dbm_to_mw(PowerDbm(p))).0;
        if (back - p).abs() > ROUND_TRIP_TOL * p.abs().max(1.0) {
            failures.push(format!("dBm round trip {p} -> {back}"));
            break;
        }
    }

    // Monotonicity in power and wavelength on a fine power grid.
    let mut s = scenario_file("paper_fig2cd.scenario");
    s.sweep.values = SweepValues::Range {
        start: -10.0,
        stop: 12.0,
        step: 0.05,
    };
    let sweep = run_sweep(&s).unwrap();
    let mut channels = s.plan.ds_channels.clone();
    channels.sort_unstable();
    for &n in &channels {
        let rates: Vec<f64> = sweep
            .channel_rows(n)
            .map(|r| r.point.rate.r_bits_per_pulse)
            .collect();
        if rates.windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("ch{n}: rate increases with downstream power"));
        }
    }
    for pair in sweep.rows.chunks(channels.len()) {
        // Rows for one power, ascending channel index = ascending frequency.
        if pair
            .windows(2)
            .any(|w| w[1].point.rate.r_bits_per_pulse > w[0].point.rate.r_bits_per_pulse)
        {
            failures.push(format!(
                "rate increases with frequency at {} dBm",
                pair[0].axis_value
            ));
            break;
        }
    }

    // Backscatter dominates forward noise at equal launch powers.
    let s = scenario_file("paper_fig2cd.scenario");
    for (n, f) in band_channels(&s) {
        for i in 0..=96 {
            let p = -10.0 + 0.2 * i as f64;
            let e = s.evaluate_point(f, PowerDbm(p), PowerDbm(p)).unwrap();
            if !(e.budget.backscatter_mw.0 > e.budget.forward_us_mw.0) {
                failures.push(format!(
                    "ch{n} at {p:.1} dBm: forward noise not below backscatter"
                ));
            }
        }
    }

    // Determinism.
    let s = scenario_file("paper_fig2ef.scenario");
    let reference = csv_with_threads(&s, 1);
    for threads in [1, 2, 3, 8] {
        if csv_with_threads(&s, threads) != reference {
            failures.push(format!("CSV differs with {threads} threads"));
        }
    }

    let detail = if failures.is_empty() {
        "entropy, round trip, monotonicity, backscatter dominance and determinism hold".to_string()
    } else {
        failures.join("; ")
    };
    let ok = report(
        "5",
        "property suite",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(30),
        &detail,
    );
    assert!(ok, "{detail}");
}
