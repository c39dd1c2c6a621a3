use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::{CellId, Resolution};
use crate::mobility::{
    build_trajectory_set, generate_synthetic_city, generate_synthetic_pois, ingest_trajectories, DatasetOptions,
    HistoryIndex, ParseMode, RawTrajectory, SyntheticCitySpec, TrajectorySet,
};
use crate::places::{extract_home_work_all, workplace_heatmap, HomeWorkParams, HomeWorkTable};
use crate::risk::{ingest_pois, CategoryRegistry, PoiCounts, PoiRecord, RiskConfig, RiskField, Weighting};
use crate::time::{date_to_day, Horizon};

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 4, 5).expect("valid date")
}

fn default_days() -> u32 {
    14
}

/// A synthetic city over `days` local days from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetRequest {
    #[serde(flatten)]
    pub spec: SyntheticCitySpec,
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    #[serde(default = "default_days")]
    pub days: u32,
    #[serde(default)]
    pub options: DatasetOptions,
}

impl SyntheticDatasetRequest {
    pub fn new(spec: SyntheticCitySpec, days: u32) -> Self {
        Self {
            spec,
            start: default_start(),
            days,
            options: DatasetOptions::default(),
        }
    }
}

/// Everything needed to rebuild a dataset; this is what gets persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticDatasetRequest),
    Upload {
        trajectories_csv: String,
        #[serde(default)]
        pois_csv: Option<String>,
        /// Derived from the data (whole local days) when absent.
        #[serde(default)]
        horizon: Option<Horizon>,
        #[serde(default)]
        options: DatasetOptions,
    },
}

/// A registered dataset with everything policies and the engine need.
#[derive(Debug)]
pub struct Dataset {
    pub id: String,
    pub source: DatasetSource,
    pub raw: Vec<RawTrajectory>,
    pub trajectories: TrajectorySet,
    pub pois: PoiCounts,
    pub home_work: HomeWorkTable,
    pub history: HistoryIndex,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub users: usize,
    pub horizon: Horizon,
    pub step: i64,
    pub pois: usize,
    pub home_work_found: usize,
    pub home_work_rejected: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub cell: CellId,
    pub count: u32,
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkplaceHeatmap {
    pub resolution: Resolution,
    pub cells: Vec<HeatmapCell>,
}

impl Dataset {
    pub fn build(source: DatasetSource) -> Result<Self> {
        let mut warnings = Vec::new();
        let (raw, trajectories, pois) = match &source {
            DatasetSource::Synthetic(req) => {
                if req.days == 0 {
                    return Err(Error::invalid("days", "must be at least 1"));
                }
                let clock = req.options.clock;
                let start = clock.day_start(date_to_day(req.start));
                let horizon = Horizon::new(start, start + i64::from(req.days) * 86_400)?;
                let city = generate_synthetic_city(&req.spec, horizon, req.options)?;
                let pois = generate_synthetic_pois(&city.zones, &req.spec.work_zone_weights, req.spec.rng_seed);
                (city.raw, city.trajectories, pois)
            }
            DatasetSource::Upload {
                trajectories_csv,
                pois_csv,
                horizon,
                options,
            } => {
                let ingest = ingest_trajectories(trajectories_csv.as_bytes(), *horizon, ParseMode::FailFast)?;
                if ingest.trajectories.is_empty() {
                    return Err(Error::invalid("trajectories", "no trajectories in the upload"));
                }
                let horizon = match horizon {
                    Some(h) => *h,
                    None => {
                        let pts = ingest.trajectories.iter().flat_map(|t| t.points.iter().map(|p| p.t));
                        let (lo, hi) = pts.fold((i64::MAX, i64::MIN), |(a, b), t| (a.min(t), b.max(t)));
                        let c = options.clock;
                        Horizon::new(c.day_start(c.day(lo)), c.day_start(c.day(hi) + 1))?
                    }
                };
                let (ts, report) = build_trajectory_set(&ingest.trajectories, horizon, *options)?;
                warnings.extend(
                    report
                        .rejected
                        .iter()
                        .map(|(u, why)| format!("user {u} dropped: {why}")),
                );
                if ts.is_empty() {
                    return Err(Error::invalid("trajectories", "no user covers the horizon"));
                }
                let pois = match pois_csv {
                    Some(csv) => {
                        let got = ingest_pois(csv.as_bytes(), &CategoryRegistry::default(), ParseMode::Lenient)?;
                        warnings.extend(
                            got.skipped
                                .iter()
                                .map(|(l, why)| format!("POI line {l} skipped: {why}")),
                        );
                        got.records
                    }
                    None => Vec::new(),
                };
                (ingest.trajectories, ts, pois)
            }
        };
        let opts = trajectories.options();
        let pois = PoiCounts::build(pois, &opts.grid, opts.resolution);
        let hw_params = HomeWorkParams {
            clock: opts.clock,
            grid: opts.grid,
            resolution: opts.resolution,
            ..Default::default()
        };
        let home_work = extract_home_work_all(&raw, trajectories.horizon(), &hw_params);
        let history = HistoryIndex::build(&trajectories);

        let mut h = Sha256::new();
        h.update(trajectories.dataset_id().as_bytes());
        h.update(serde_json::to_vec(pois.records())?);
        let id = hex::encode(&h.finalize()[..8]);
        Ok(Self {
            id,
            source,
            raw,
            trajectories,
            pois,
            home_work,
            history,
            warnings,
        })
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            dataset_id: self.id.clone(),
            users: self.trajectories.len(),
            horizon: self.trajectories.horizon(),
            step: self.trajectories.step(),
            pois: self.pois.len(),
            home_work_found: self.home_work.found.len(),
            home_work_rejected: self.home_work.rejected.len(),
            warnings: self.warnings.clone(),
        }
    }

    /// Risk field calibrated on the unrestricted trajectories.
    pub fn risk_field(&self, risk: &RiskConfig, beta_global: f64) -> Result<RiskField> {
        RiskField::build(&self.trajectories, &self.pois, risk, beta_global, Weighting::Occupancy)
    }

    pub fn workplaces(&self, res: Resolution) -> Result<WorkplaceHeatmap> {
        let grid = self.trajectories.grid();
        let counts: BTreeMap<CellId, u32> = workplace_heatmap(&self.home_work.found, grid, res)?;
        Ok(WorkplaceHeatmap {
            resolution: res,
            cells: counts
                .into_iter()
                .map(|(cell, count)| HeatmapCell {
                    cell,
                    count,
                    polygon: grid.boundary_geojson(cell),
                })
                .collect(),
        })
    }

    pub fn poi_records(&self) -> &[PoiRecord] {
        self.pois.records()
    }
}
