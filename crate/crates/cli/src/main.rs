//! `qpon-sim`: command-line front end for the QKD-over-PON simulator.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpon_core::config::{parse_scenario, raman_to_toml, ParsedScenario};
use qpon_core::oracle::{run_oracle, OracleConfig};
use qpon_core::report::{fmt_sig9, scenario_from_csv, write_csv};
use qpon_core::scenario::{calibrate, find_power_threshold, run_sweep, Anchors};
use qpon_core::units::PowerDbm;
use qpon_core::Error;

const THREADS_ENV: &str = "QPON_SIM_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "qpon-sim",
    version,
    about = "Decoy-state BB84 over a coherent PON: Raman noise, key rates, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML); a result CSV with an embedded scenario also works.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the Monte Carlo oracle (echoed in sweep metadata).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// ITU channel index of the downstream channel to use.
    #[arg(long, global = true, allow_negative_numbers = true)]
    channel: Option<i32>,
    /// Suppress informational output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Number of pulses for `oracle`.
    #[arg(long, global = true)]
    pulses: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run the scenario sweep and write a result CSV.
    Sweep,
    /// Print the largest downstream power with a positive key rate, per channel.
    Threshold,
    /// Fit the Raman efficiency table to the key-rate anchors.
    Calibrate,
    /// Run the photon-level Monte Carlo at the scenario's operating point.
    Oracle,
    /// Parse a scenario and report defaulted keys without running it.
    Validate,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("error[config]: argv: {first}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error[config]: {}", m.replace('\n', " "));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error[runtime]: {}", m.replace('\n', " "));
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(format!(
            "{THREADS_ENV}: expected a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}

fn load(path: Option<&Path>) -> Result<ParsedScenario, Failure> {
    let Some(path) = path else {
        return Ok(parse_scenario("")?);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let parsed = if text.lines().any(|l| l == "# begin scenario") {
        scenario_from_csv(&text)
    } else {
        parse_scenario(&text)
    };
    parsed.map_err(|e| match e {
        Error::Config { key, message } => {
            Failure::Config(format!("{}: {key}: {message}", path.display()))
        }
        other => other.into(),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Runtime(format!("stdout: {e}"))),
    }
}

fn fmt_dbm(p: f64) -> String {
    if p.is_infinite() {
        fmt_sig9(p)
    } else {
        format!("{p:.2}")
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    let ParsedScenario {
        mut scenario,
        defaulted,
    } = load(cli.scenario.as_deref())?;
    if let Some(seed) = cli.seed {
        scenario.oracle.seed = seed;
    }
    if let Some(n) = cli.pulses {
        scenario.oracle.n_pulses = n;
    }
    let info = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };

    match cli.command {
        Command::Validate => {
            let mut text = String::from("status = ok\n");
            text.push_str(&format!("defaulted_count = {}\n", defaulted.len()));
            for k in &defaulted {
                text.push_str(&format!("defaulted = {k}\n"));
            }
            emit(cli.out.as_deref(), &text)
        }
        Command::Sweep => {
            if let Some(n) = cli.channel {
                scenario.plan.ds_channels = vec![n];
                scenario.validate()?;
            }
            let result = run_sweep(&scenario)?;
            info(format!("{} rows", result.rows.len()));
            emit(cli.out.as_deref(), &write_csv(&result, &defaulted))
        }
        Command::Threshold => {
            let channels = match cli.channel {
                Some(n) => vec![n],
                None => scenario.plan.ds_channels.clone(),
            };
            let mut text = String::new();
            for n in channels {
                let f = scenario.plan.ds_frequency(n)?;
                let PowerDbm(p) = find_power_threshold(&scenario, n)?;
                text.push_str(&format!(
                    "channel={n} frequency_thz={f} threshold_dbm={}\n",
                    fmt_dbm(p)
                ));
            }
            emit(cli.out.as_deref(), &text)
        }
        Command::Calibrate => {
            let report = calibrate(&scenario, &Anchors::default())?;
            let mut text = String::new();
            text.push_str(&format!("# calibration scale = {:e}\n", report.scale));
            for r in &report.rows {
                text.push_str(&format!(
                    "# {} THz: input {:e}, ceiling {:e}, output {:e}, threshold {} dBm\n",
                    r.frequency_thz,
                    r.input_rho,
                    r.ceiling_rho,
                    r.output_rho,
                    fmt_dbm(r.threshold_dbm)
                ));
            }
            for c in &report.checks {
                text.push_str(&format!(
                    "# anchor {} @ {} THz [{}]: {} ({})\n",
                    c.name,
                    c.frequency_thz,
                    if c.hard { "hard" } else { "soft" },
                    if c.satisfied { "ok" } else { "violated" },
                    c.detail
                ));
            }
            text.push_str(&raman_to_toml(&report.table));
            for w in &report.warnings {
                info(format!("warning: {w}"));
            }
            if !report.all_hard_satisfied() {
                return Err(Failure::Runtime(
                    "calibration left a hard anchor unsatisfied".into(),
                ));
            }
            emit(cli.out.as_deref(), &text)
        }
        Command::Oracle => {
            let n = cli.channel.unwrap_or(scenario.plan.ds_channels[0]);
            let f = scenario.plan.ds_frequency(n)?;
            let point = scenario.evaluate_point(
                f,
                PowerDbm(scenario.sweep.ds_power_dbm),
                PowerDbm(scenario.sweep.us_power_dbm),
            )?;
            let cfg = OracleConfig {
                n_pulses: scenario.oracle.n_pulses,
                seed: scenario.oracle.seed,
                intensity: scenario.decoy.mu,
                eta: point.eta_channel * scenario.detector.efficiency,
                p_dark: scenario.detector.dark_prob,
                num_detectors: scenario.detector.num_detectors,
                p_noise: point.p_noise,
                e_d: scenario.decoy.e_d,
            };
            let tally = run_oracle(&cfg)?;
            let mut text = tally.to_text(&cfg);
            text.push_str(&format!("analytic_gain = {}\n", fmt_sig9(point.rate.q_mu)));
            text.push_str(&format!("analytic_qber = {}\n", fmt_sig9(point.rate.e_mu)));
            emit(cli.out.as_deref(), &text)
        }
    }
}
