use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::Engine;
use super::{EpidemicParams, SimulationRun};
use crate::error::{Error, Result};
use crate::geo::{Grid, Resolution};
use crate::mobility::TrajectorySet;
use crate::policy::ScreeningPlan;
use crate::risk::RiskField;
use crate::time::{Horizon, LocalClock};

/// Empirical percentile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty; `p` is in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Mean and empirical 95% band of one day's cumulative infections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayBand {
    pub day: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// What analytics need to know about the simulated world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    pub horizon: Horizon,
    pub step: i64,
    pub population: usize,
    pub days: usize,
    pub clock: LocalClock,
    pub grid: Grid,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub fingerprint: String,
    pub params: EpidemicParams,
    pub meta: ResultMeta,
    pub runs: Vec<SimulationRun>,
    /// Indices into `runs` whose total infections lie in the [2.5, 97.5] percentile interval.
    pub kept: Vec<usize>,
    pub band: Vec<DayBand>,
}

impl EnsembleResult {
    pub fn kept_runs(&self) -> impl Iterator<Item = &SimulationRun> {
        self.kept.iter().map(|&i| &self.runs[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub m: usize,
    /// Worker threads; `None` uses the ambient pool, `Some(1)` runs sequentially.
    pub workers: Option<usize>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { m: 100, workers: None }
    }
}

/// Runs indices `kept` whose totals lie within the empirical 2.5–97.5% interval.
pub(crate) fn ci_filter(totals: &[usize]) -> Vec<usize> {
    let mut sorted: Vec<f64> = totals.iter().map(|&t| t as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile(&sorted, 2.5), percentile(&sorted, 97.5));
    totals
        .iter()
        .enumerate()
        .filter(|(_, &t)| (t as f64) >= lo && (t as f64) <= hi)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn bands(runs: &[SimulationRun], kept: &[usize]) -> Vec<DayBand> {
    let days = runs.first().map_or(0, |r| r.daily.len());
    (0..days)
        .map(|d| {
            let mut v: Vec<f64> = kept.iter().map(|&k| runs[k].daily[d].cum_infections as f64).collect();
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            DayBand {
                day: d,
                mean,
                lo: percentile(&v, 2.5),
                hi: percentile(&v, 97.5),
            }
        })
        .collect()
}

impl Engine {
    /// `m` runs with seeds derived from `params.rng_seed`, CI-filtered.
    /// Results do not depend on the number of workers.
    pub fn ensemble(&self, params: &EpidemicParams, opts: EnsembleOptions, meta: ResultMeta) -> Result<EnsembleResult> {
        self.ensemble_with(params, opts, meta, &|| {})
    }

    /// As [`Engine::ensemble`], calling `on_run` after each run completes.
    pub fn ensemble_with(
        &self,
        params: &EpidemicParams,
        opts: EnsembleOptions,
        meta: ResultMeta,
        on_run: &(dyn Fn() + Sync),
    ) -> Result<EnsembleResult> {
        if opts.m < 2 {
            return Err(Error::invalid("m", "an ensemble needs at least 2 runs"));
        }
        if opts.workers == Some(0) {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        let one = |k: usize| {
            let r = self.run(params, k);
            on_run();
            r
        };
        let go = || -> Result<Vec<SimulationRun>> { (0..opts.m).into_par_iter().map(one).collect() };
        let runs = match opts.workers {
            Some(1) => (0..opts.m).map(one).collect::<Result<Vec<_>>>()?,
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?
                .install(go)?,
            None => go()?,
        };
        let totals: Vec<usize> = runs.iter().map(SimulationRun::total_infections).collect();
        let kept = ci_filter(&totals);
        let band = bands(&runs, &kept);
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(params)?);
        h.update(opts.m.to_le_bytes());
        h.update(serde_json::to_vec(&meta)?);
        Ok(EnsembleResult {
            fingerprint: hex::encode(&h.finalize()[..16]),
            params: *params,
            meta,
            runs,
            kept,
            band,
        })
    }
}

/// Builds an engine over `ts` and runs an ensemble.
pub fn run_ensemble(
    ts: &TrajectorySet,
    field: &RiskField,
    params: &EpidemicParams,
    plan: &ScreeningPlan,
    opts: EnsembleOptions,
) -> Result<EnsembleResult> {
    let engine = Engine::new(ts, field, plan)?;
    let meta = ResultMeta {
        horizon: ts.horizon(),
        step: ts.step(),
        population: ts.len(),
        days: engine.days(),
        clock: ts.clock(),
        grid: *ts.grid(),
        resolution: ts.resolution(),
    };
    engine.ensemble(params, opts, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_linear_rule() {
        let v: Vec<f64> = (1..=5).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert!((percentile(&v, 2.5) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn filter_keeps_identical_totals() {
        assert_eq!(ci_filter(&[4; 10]), (0..10).collect::<Vec<_>>());
        let totals: Vec<usize> = (0..100).collect();
        let kept = ci_filter(&totals);
        assert!((90..=100).contains(&kept.len()));
        assert!(!kept.contains(&0) && !kept.contains(&99));
    }
}
