use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::Dataset;
use crate::engine::{Engine, EnsembleOptions, EnsembleResult, EpidemicParams, ResultMeta};
use crate::error::{Error, Result};
use crate::policy::{compose_plan, PolicyInputs, PolicySpec};
use crate::risk::RiskConfig;

fn default_m() -> usize {
    100
}

/// One simulation request: dataset, epidemic and risk parameters, policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(default)]
    pub dataset_id: String,
    #[serde(default)]
    pub params: EpidemicParams,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub name: String,
}

impl SimulationConfig {
    pub fn new(dataset_id: impl Into<String>, params: EpidemicParams, m: usize) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            params,
            risk: RiskConfig::default(),
            policies: Vec::new(),
            m,
            name: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset_id.is_empty() {
            return Err(Error::invalid("dataset_id", "missing"));
        }
        self.params.validate()?;
        self.risk.validate()?;
        if self.m < 2 {
            return Err(Error::invalid("m", "an ensemble needs at least 2 runs"));
        }
        for (i, p) in self.policies.iter().enumerate() {
            p.validate().map_err(|e| match e {
                Error::InvalidInput { field, message } => Error::invalid(format!("policies[{i}].{field}"), message),
                e => e,
            })?;
        }
        Ok(())
    }

    /// Content hash of everything that affects results; the display name is left out.
    pub fn fingerprint(&self) -> String {
        let mut canonical = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = canonical.as_object_mut() {
            obj.remove("name");
        }
        // serde_json maps are sorted, so this serialization is canonical.
        let bytes = serde_json::to_vec(&canonical).expect("value serializes");
        hex::encode(&Sha256::digest(&bytes)[..16])
    }

    /// users × simulated days × runs, the unit of the capacity budget.
    pub fn cost(&self, ds: &Dataset) -> u64 {
        let days = ds.trajectories.days().count() as u64;
        ds.trajectories.len() as u64 * days * self.m as u64
    }
}

/// Applies the policies, builds the engine and runs the ensemble.
/// `on_run` is called once per finished run.
pub fn execute(
    ds: &Dataset,
    cfg: &SimulationConfig,
    workers: Option<usize>,
    on_run: &(dyn Fn() + Sync),
) -> Result<EnsembleResult> {
    cfg.validate()?;
    if cfg.dataset_id != ds.id {
        return Err(Error::invalid("dataset_id", "config names a different dataset"));
    }
    let plan = compose_plan(
        &ds.trajectories,
        &cfg.policies,
        PolicyInputs {
            home_work: Some(&ds.home_work),
            history: Some(&ds.history),
            districts: None,
        },
    )?;
    let field = ds.risk_field(&cfg.risk, cfg.params.beta_global)?;
    let ts = &plan.trajectories;
    let engine = Engine::new(ts, &field, &plan.screening)?;
    let meta = ResultMeta {
        horizon: ts.horizon(),
        step: ts.step(),
        population: ts.len(),
        days: engine.days(),
        clock: ts.clock(),
        grid: *ts.grid(),
        resolution: ts.resolution(),
    };
    let mut er = engine.ensemble_with(&cfg.params, EnsembleOptions { m: cfg.m, workers }, meta, on_run)?;
    er.fingerprint = cfg.fingerprint();
    Ok(er)
}
