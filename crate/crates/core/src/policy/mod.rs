//! Mobility restriction policies.
//!
//! Telecommuting and lockdown rewrite trajectories (days are replaced, users
//! are never removed); screening compiles to a per-cell detection plan that
//! the engine consults every step.

mod lockdown;
mod screening;
mod telecommute;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CellId, GeoPolygon};
use crate::mobility::{HistoryIndex, TrajectorySet};
use crate::places::HomeWorkTable;
use crate::time::date_to_day;

pub use lockdown::{apply_lockdown, LockdownReport};
pub use screening::{compile_screening, ScreeningPlan, ScreeningWindow};
pub use telecommute::{apply_telecommuting, TelecommuteReport};

pub const DEFAULT_DETECT_PROB: f64 = 0.879;

fn default_detect_prob() -> f64 {
    DEFAULT_DETECT_PROB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: String,
    /// First local day the policy is in force.
    pub start: NaiveDate,
    /// Number of days in force; clipped at the end of the horizon.
    pub days: u32,
    #[serde(default, alias = "rng_seed")]
    pub seed: u64,
    #[serde(flatten)]
    pub kind: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Lockdown {
        polygons: Vec<GeoPolygon>,
    },
    Telecommuting {
        regions: Vec<TelecommuteRegion>,
    },
    Screening {
        cells: Vec<CellId>,
        #[serde(default = "default_detect_prob")]
        detect_prob: f64,
    },
}

/// A region given either as a polygon or by district name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelecommuteRegion {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<GeoPolygon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub district: Option<String>,
    pub reduction: f64,
}

impl PolicySpec {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PolicyKind::Lockdown { .. } => "lockdown",
            PolicyKind::Telecommuting { .. } => "telecommuting",
            PolicyKind::Screening { .. } => "screening",
        }
    }

    /// Local days in force, clipped to `ts`. Errors when the start day is
    /// outside the horizon.
    pub fn day_range(&self, ts: &TrajectorySet) -> Result<Range<i64>> {
        if self.days == 0 {
            return Err(Error::invalid(format!("{}.days", self.name), "must be at least 1"));
        }
        let start = date_to_day(self.start);
        let horizon_days = ts.days();
        if !horizon_days.contains(&start) {
            return Err(Error::invalid(
                format!("{}.start", self.name),
                format!("{} lies outside the simulation horizon", self.start),
            ));
        }
        Ok(start..(start + i64::from(self.days)).min(horizon_days.end))
    }

    /// Tick range covering `day_range`.
    pub fn tick_range(&self, ts: &TrajectorySet) -> Result<Range<usize>> {
        let days = self.day_range(ts)?;
        Ok(ts.day_ticks(days.start).start..ts.day_ticks(days.end - 1).end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name", "policy name must not be empty"));
        }
        let field = |f: &str| format!("{}.{f}", self.name);
        match &self.kind {
            PolicyKind::Lockdown { polygons } => {
                if polygons.is_empty() {
                    return Err(Error::invalid(field("polygons"), "at least one region is required"));
                }
            }
            PolicyKind::Telecommuting { regions } => {
                if regions.is_empty() {
                    return Err(Error::invalid(field("regions"), "at least one region is required"));
                }
                for (i, r) in regions.iter().enumerate() {
                    if !(0.0..=1.0).contains(&r.reduction) {
                        return Err(Error::invalid(
                            field(&format!("regions[{i}].reduction")),
                            "must lie in [0, 1]",
                        ));
                    }
                    if r.polygon.is_some() == r.district.is_some() {
                        return Err(Error::invalid(
                            field(&format!("regions[{i}]")),
                            "give exactly one of `polygon` or `district`",
                        ));
                    }
                }
            }
            PolicyKind::Screening { cells, detect_prob } => {
                if cells.is_empty() {
                    return Err(Error::invalid(field("cells"), "at least one cell is required"));
                }
                if !(0.0..=1.0).contains(detect_prob) {
                    return Err(Error::invalid(field("detect_prob"), "must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

/// Named districts usable as telecommuting regions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistrictTable(pub BTreeMap<String, Vec<GeoPolygon>>);

impl DistrictTable {
    pub fn get(&self, name: &str) -> Option<&[GeoPolygon]> {
        self.0.get(name).map(Vec::as_slice)
    }
}

/// Auxiliary data some policies need.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyInputs<'a> {
    pub home_work: Option<&'a HomeWorkTable>,
    pub history: Option<&'a HistoryIndex>,
    pub districts: Option<&'a DistrictTable>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PlanReport {
    pub telecommute: Vec<TelecommuteReport>,
    pub lockdown: Vec<LockdownReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RestrictedMobilityPlan {
    pub trajectories: TrajectorySet,
    pub screening: ScreeningPlan,
    /// Policies in the order they were applied.
    pub provenance: Vec<PolicySpec>,
    pub report: PlanReport,
}

/// Applies every telecommuting policy, then every lockdown, and merges all
/// screening policies into one plan.
pub fn compose_plan(
    ts: &TrajectorySet,
    policies: &[PolicySpec],
    inputs: PolicyInputs<'_>,
) -> Result<RestrictedMobilityPlan> {
    let mut names = BTreeSet::new();
    for p in policies {
        p.validate()?;
        p.day_range(ts)?;
        if !names.insert(p.name.as_str()) {
            return Err(Error::invalid(
                "policies",
                format!("duplicate policy name {:?}", p.name),
            ));
        }
    }
    let of_kind = |k: &'static str| policies.iter().filter(move |p| p.kind_name() == k);

    let mut report = PlanReport::default();
    let mut provenance = Vec::new();
    let mut current = ts.clone();

    let telecommutes: Vec<_> = of_kind("telecommuting").collect();
    if !telecommutes.is_empty() {
        let hw = inputs
            .home_work
            .ok_or_else(|| Error::invalid("policies", "telecommuting needs home/work locations"))?;
        let empty = DistrictTable::default();
        let districts = inputs.districts.unwrap_or(&empty);
        for p in telecommutes {
            let (next, r) = apply_telecommuting(&current, hw, p, districts)?;
            report.warnings.extend(r.warnings.iter().cloned());
            report.telecommute.push(r);
            current = next;
            provenance.push(p.clone());
        }
    }

    let lockdowns: Vec<_> = of_kind("lockdown").collect();
    if !lockdowns.is_empty() {
        let built;
        let history = match inputs.history {
            Some(h) => h,
            None => {
                built = HistoryIndex::build(ts);
                &built
            }
        };
        let homes: HashMap<&str, CellId> = inputs
            .home_work
            .map(|hw| hw.found.iter().map(|h| (h.uid.as_str(), h.home_cell)).collect())
            .unwrap_or_default();
        for p in lockdowns {
            let (next, r) = apply_lockdown(&current, ts, history, p, &homes)?;
            report.lockdown.push(r);
            current = next;
            provenance.push(p.clone());
        }
    }

    let mut screening = ScreeningPlan::default();
    for p in of_kind("screening") {
        screening.merge(compile_screening(p, ts)?);
        provenance.push(p.clone());
    }

    Ok(RestrictedMobilityPlan {
        trajectories: current,
        screening,
        provenance,
        report,
    })
}
