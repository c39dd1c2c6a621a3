//! Trajectory-driven stochastic SEIR.
//!
//! Each step runs three phases: contagion inside every cell holding exposed
//! or infectious users, screening at planned cells, then movement to the
//! next trajectory tick. Per-day rates are scaled to the step length, and
//! transition counts are drawn as `floor(x) + Bernoulli(frac(x))` from
//! start-of-step counts.

mod ensemble;
mod export;
mod run;
mod state;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::CellId;
use crate::mobility::DEFAULT_STEP_SECS;
use crate::risk::DEFAULT_BETA_GLOBAL;
use crate::time::SECS_PER_DAY;

pub use ensemble::{percentile, run_ensemble, DayBand, EnsembleOptions, EnsembleResult, ResultMeta};
pub use export::{read_events_jsonl, write_daily_csv, write_events_jsonl};
pub use run::{run_simulation, Engine, FractionalDay};
pub use state::{CompiledMobility, EpidemicState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
#[repr(u8)]
pub enum Compartment {
    S = 0,
    E = 1,
    I = 2,
    R = 3,
}

impl Compartment {
    pub const ALL: [Compartment; 4] = [Compartment::S, Compartment::E, Compartment::I, Compartment::R];

    pub fn index(self) -> usize {
        self as usize
    }
}

fn d_beta() -> f64 {
    DEFAULT_BETA_GLOBAL
}
fn d_sigma() -> f64 {
    0.2
}
fn d_gamma() -> f64 {
    0.1
}
fn d_i0() -> usize {
    10
}
fn d_step() -> i64 {
    DEFAULT_STEP_SECS
}

/// Rates are per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    #[serde(default = "d_beta")]
    pub beta_global: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_i0")]
    pub i0: usize,
    #[serde(default = "d_step")]
    pub step: i64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self {
            beta_global: d_beta(),
            sigma: d_sigma(),
            gamma: d_gamma(),
            i0: d_i0(),
            step: d_step(),
            rng_seed: 0,
        }
    }
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_global", self.beta_global),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    format!("params.{name}"),
                    "must be a non-negative number",
                ));
            }
        }
        if self.i0 == 0 {
            return Err(Error::invalid("params.i0", "must be at least 1"));
        }
        if self.step <= 0 {
            return Err(Error::invalid("params.step", "must be positive"));
        }
        Ok(())
    }

    /// Fraction of a day covered by one step.
    pub fn step_days(&self) -> f64 {
        self.step as f64 / SECS_PER_DAY as f64
    }
}

/// `floor(x) + Bernoulli(x − floor(x))`; the expectation is `x`.
pub fn sample_discrete_increment<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<u64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::invalid(
            "x",
            format!("increment must be a non-negative number, got {x}"),
        ));
    }
    let whole = x.floor();
    let frac = x - whole;
    let extra = u64::from(frac > 0.0 && rng.random::<f64>() < frac);
    Ok(whole as u64 + extra)
}

/// Continuous increments `(S→E, E→I, I→R)` for one cell over one step, from
/// start-of-step counts and per-step rates.
pub fn continuous_increments(counts: [f64; 4], beta_step: f64, sigma_step: f64, gamma_step: f64) -> [f64; 3] {
    let [s, e, i, r] = counts;
    let n = s + e + i + r;
    let to_e = if n > 0.0 { beta_step * s * i / n } else { 0.0 };
    [to_e, sigma_step * e, gamma_step * i]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfectionEvent {
    pub run: usize,
    pub uid: String,
    pub t: i64,
    pub cell: CellId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub uid: String,
    pub t: i64,
    pub cell: CellId,
}

/// Compartment totals at the end of a simulation day (quarantined users included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCounts {
    pub day: usize,
    pub s: usize,
    pub e: usize,
    pub i: usize,
    pub r: usize,
    pub quarantined: usize,
    pub cum_infections: usize,
    pub cum_onsets: usize,
    pub cum_removals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub run_index: usize,
    pub rng_seed: u64,
    pub initial_infected: Vec<String>,
    pub events: Vec<InfectionEvent>,
    pub daily: Vec<DailyCounts>,
    pub detections: Vec<Detection>,
}

impl SimulationRun {
    /// Infections during the run; the initially infected are not counted.
    pub fn total_infections(&self) -> usize {
        self.events.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn increment_integers_and_zero() {
        let mut r = rng::stream(&[1]);
        for _ in 0..100 {
            assert_eq!(sample_discrete_increment(0.0, &mut r).unwrap(), 0);
            assert_eq!(sample_discrete_increment(2.0, &mut r).unwrap(), 2);
        }
        assert!(sample_discrete_increment(-0.1, &mut r).is_err());
        assert!(sample_discrete_increment(f64::NAN, &mut r).is_err());
    }

    #[test]
    fn increment_unbiased() {
        // Mean of 10⁶ draws within 3 standard errors of x.
        for (k, x) in [0.001f64, 0.3, 1.7].into_iter().enumerate() {
            let mut r = rng::stream(&[7, k as u64]);
            let n = 1_000_000;
            let sum: u64 = (0..n).map(|_| sample_discrete_increment(x, &mut r).unwrap()).sum();
            let mean = sum as f64 / n as f64;
            let p = x - x.floor();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((mean - x).abs() <= 3.0 * se, "x={x} mean={mean} se={se}");
        }
    }

    #[test]
    fn continuous_increment_examples() {
        let [to_e, _, _] = continuous_increments([99.0, 0.0, 1.0, 0.0], 0.302, 0.2, 0.1);
        assert!((to_e - 0.29898).abs() < 1e-12);
        let [to_e, to_i, _] = continuous_increments([0.0, 10.0, 0.0, 0.0], 0.302, 0.2, 0.1);
        assert_eq!(to_e, 0.0);
        assert!((to_i - 2.0).abs() < 1e-12);
        let [to_e, _, _] = continuous_increments([50.0, 0.0, 0.0, 0.0], 0.302, 0.2, 0.1);
        assert_eq!(to_e, 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(EpidemicParams::default().validate().is_ok());
        assert!(EpidemicParams {
            i0: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EpidemicParams {
            gamma: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let p: EpidemicParams = serde_json::from_str("{}").unwrap();
        assert_eq!(p, EpidemicParams::default());
    }
}
