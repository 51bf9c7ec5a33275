//! Seeded photon-level Monte Carlo of source → channel → detectors.
//!
//! Pulses are processed in fixed-size blocks. Block `b` draws from its own
//! ChaCha stream (`set_stream(b)`) of the configured seed, so the tally does
//! not depend on how blocks are scheduled across threads.
//!
//! Per pulse: `n ~ Poisson(intensity)` photons are emitted; each survives with
//! probability `eta` and, if it does, lands on the wrong detector with
//! probability `e_d`. Every detector fires a dark count with `p_dark` and SpRS
//! fires one with `p_noise`; background clicks go to either side with equal
//! odds. The side with more votes wins, ties are broken by a fair coin drawn
//! from the same stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};

const BLOCK_PULSES: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub intensity: f64,
    /// End-to-end single-photon detection probability (channel × detector).
    pub eta: f64,
    pub p_dark: f64,
    pub num_detectors: u32,
    pub p_noise: f64,
    pub e_d: f64,
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::config("oracle.n_pulses", "need at least one pulse"));
        }
        if !(self.intensity >= 0.0) || !self.intensity.is_finite() {
            return Err(Error::config("oracle.intensity", "must be finite and >= 0"));
        }
        for (key, p) in [
            ("oracle.eta", self.eta),
            ("oracle.p_dark", self.p_dark),
            ("oracle.p_noise", self.p_noise),
            ("oracle.e_d", self.e_d),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(
                    key,
                    format!("probability {p} outside [0, 1]"),
                ));
            }
        }
        // Emitted-photon counter: mean plus a wide Poisson margin must fit in u64.
        let n = self.n_pulses as f64;
        let worst = n * self.intensity + 10.0 * (n * self.intensity).sqrt() + 10.0 * self.intensity;
        if worst >= u64::MAX as f64 {
            return Err(Error::config(
                "oracle.n_pulses",
                "pulse count times intensity overflows the 64-bit photon counter",
            ));
        }
        Ok(())
    }

    /// Background click probability implied by the dark and noise components.
    pub fn background_yield(&self) -> f64 {
        1.0 - (1.0 - self.p_dark).powi(self.num_detectors as i32) * (1.0 - self.p_noise)
    }
}

/// Counts for pulses that emitted a given number of photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassTally {
    pub pulses: u64,
    pub clicks: u64,
    pub errors: u64,
}

impl ClassTally {
    fn merge(self, o: Self) -> Self {
        ClassTally {
            pulses: self.pulses + o.pulses,
            clicks: self.clicks + o.clicks,
            errors: self.errors + o.errors,
        }
    }

    /// Click probability and its binomial standard error.
    pub fn yield_with_se(&self) -> (f64, f64) {
        ratio_with_se(self.clicks, self.pulses)
    }

    /// Error fraction among clicks and its binomial standard error.
    pub fn error_with_se(&self) -> (f64, f64) {
        ratio_with_se(self.errors, self.clicks)
    }
}

fn ratio_with_se(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Aggregate result of an oracle run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleTally {
    pub total: ClassTally,
    pub photons_emitted: u64,
    /// Indexed by emitted photon number 0, 1, 2 and 3-or-more.
    pub by_photon_number: [ClassTally; 4],
}

impl OracleTally {
    fn merge(self, o: Self) -> Self {
        let mut by = self.by_photon_number;
        for (a, b) in by.iter_mut().zip(o.by_photon_number) {
            *a = a.merge(b);
        }
        OracleTally {
            total: self.total.merge(o.total),
            photons_emitted: self.photons_emitted + o.photons_emitted,
            by_photon_number: by,
        }
    }

    pub fn gain(&self) -> (f64, f64) {
        self.total.yield_with_se()
    }

    pub fn qber(&self) -> (f64, f64) {
        self.total.error_with_se()
    }

    /// Empirical `Y_n`; `n >= 3` is pooled.
    pub fn yield_n(&self, n: usize) -> (f64, f64) {
        self.by_photon_number[n.min(3)].yield_with_se()
    }

    pub fn error_n(&self, n: usize) -> (f64, f64) {
        self.by_photon_number[n.min(3)].error_with_se()
    }

    /// Key/value rendering, one quantity per line.
    pub fn to_text(&self, cfg: &OracleConfig) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("seed", cfg.seed.to_string());
        kv("n_pulses", cfg.n_pulses.to_string());
        kv("intensity", format!("{:?}", cfg.intensity));
        kv("eta", format!("{:?}", cfg.eta));
        kv("p_dark", format!("{:?}", cfg.p_dark));
        kv("num_detectors", cfg.num_detectors.to_string());
        kv("p_noise", format!("{:?}", cfg.p_noise));
        kv("e_d", format!("{:?}", cfg.e_d));
        kv("photons_emitted", self.photons_emitted.to_string());
        kv("clicks", self.total.clicks.to_string());
        kv("errors", self.total.errors.to_string());
        let (q, q_se) = self.gain();
        let (e, e_se) = self.qber();
        kv("gain", format!("{q:.9e}"));
        kv("gain_se", format!("{q_se:.9e}"));
        kv("qber", format!("{e:.9e}"));
        kv("qber_se", format!("{e_se:.9e}"));
        for (n, c) in self.by_photon_number.iter().enumerate() {
            let label = if n == 3 {
                "3plus".to_string()
            } else {
                n.to_string()
            };
            kv(&format!("n{label}_pulses"), c.pulses.to_string());
            kv(&format!("n{label}_clicks"), c.clicks.to_string());
            kv(&format!("n{label}_errors"), c.errors.to_string());
            let (y, y_se) = c.yield_with_se();
            let (en, en_se) = c.error_with_se();
            kv(&format!("n{label}_yield"), format!("{y:.9e}"));
            kv(&format!("n{label}_yield_se"), format!("{y_se:.9e}"));
            kv(&format!("n{label}_error"), format!("{en:.9e}"));
            kv(&format!("n{label}_error_se"), format!("{en_se:.9e}"));
        }
        s
    }
}

fn run_block(cfg: &OracleConfig, block: u64) -> OracleTally {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(block);
    let start = block * BLOCK_PULSES;
    let len = BLOCK_PULSES.min(cfg.n_pulses - start);
    let poisson =
        (cfg.intensity > 0.0).then(|| Poisson::new(cfg.intensity).expect("positive intensity"));

    let mut tally = OracleTally::default();
    for _ in 0..len {
        let n = match &poisson {
            Some(p) => p.sample(&mut rng) as u64,
            None => 0,
        };
        let (mut right, mut wrong) = (0u64, 0u64);
        for _ in 0..n {
            if rng.random::<f64>() < cfg.eta {
                if rng.random::<f64>() < cfg.e_d {
                    wrong += 1;
                } else {
                    right += 1;
                }
            }
        }
        let mut background = 0u32;
        for _ in 0..cfg.num_detectors {
            background += u32::from(rng.random::<f64>() < cfg.p_dark);
        }
        background += u32::from(rng.random::<f64>() < cfg.p_noise);
        for _ in 0..background {
            if rng.random::<bool>() {
                wrong += 1;
            } else {
                right += 1;
            }
        }

        let click = right + wrong > 0;
        let error = click
            && match wrong.cmp(&right) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => rng.random::<bool>(),
            };
        let class = &mut tally.by_photon_number[n.min(3) as usize];
        class.pulses += 1;
        class.clicks += u64::from(click);
        class.errors += u64::from(error);
        tally.photons_emitted += n;
    }
    tally.total = tally
        .by_photon_number
        .iter()
        .fold(ClassTally::default(), |a, &b| a.merge(b));
    tally
}

/// Run the Monte Carlo oracle. Bit-exact for a fixed seed and pulse count.
pub fn run_oracle(cfg: &OracleConfig) -> Result<OracleTally> {
    cfg.validate()?;
    let blocks = cfg.n_pulses.div_ceil(BLOCK_PULSES);
    Ok((0..blocks)
        .into_par_iter()
        .map(|b| run_block(cfg, b))
        .reduce(OracleTally::default, OracleTally::merge))
}
