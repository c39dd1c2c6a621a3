use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DistrictTable, PolicyKind, PolicySpec};
use crate::error::{Error, Result};
use crate::geo::CellId;
use crate::mobility::TrajectorySet;
use crate::places::{HomeWork, HomeWorkTable};
use crate::rng::{self, TAG_TELECOMMUTE};
use crate::time::SECS_PER_HOUR;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TelecommuteReport {
    pub policy: String,
    /// Users selected to telecommute, sorted.
    pub affected: Vec<String>,
    /// Number of user-days replaced by the home cell.
    pub days_replaced: usize,
    pub warnings: Vec<String>,
}

/// Replaces the workdays of a seeded subsample of each region's workers
/// with a constant home cell. Exactly `round(reduction · n)` of the `n`
/// workers of a region are selected, once for the whole policy.
pub fn apply_telecommuting(
    ts: &TrajectorySet,
    hw: &HomeWorkTable,
    spec: &PolicySpec,
    districts: &DistrictTable,
) -> Result<(TrajectorySet, TelecommuteReport)> {
    let PolicyKind::Telecommuting { regions } = &spec.kind else {
        return Err(Error::invalid("kind", "expected a telecommuting policy"));
    };
    let days = spec.day_range(ts)?;
    let grid = ts.grid();
    let res = ts.resolution();
    let mut report = TelecommuteReport {
        policy: spec.name.clone(),
        ..Default::default()
    };

    // Only users present in the dataset can be affected.
    let mut workers: Vec<&HomeWork> = hw.found.iter().filter(|h| ts.index_of(&h.uid).is_some()).collect();
    workers.sort_by(|a, b| a.uid.cmp(&b.uid));

    let mut affected: BTreeSet<&str> = BTreeSet::new();
    for (ri, region) in regions.iter().enumerate() {
        let polygons = match (&region.polygon, &region.district) {
            (Some(p), _) => vec![p.clone()],
            (None, Some(d)) => districts
                .get(d)
                .ok_or_else(|| Error::not_found("district", d.clone()))?
                .to_vec(),
            (None, None) => Vec::new(),
        };
        let mut cells = BTreeSet::new();
        for p in &polygons {
            cells.extend(grid.cells_covering(p, res)?);
        }
        if cells.is_empty() {
            report
                .warnings
                .push(format!("{}: region {ri} covers no cells; skipped", spec.name));
            continue;
        }
        let mut eligible: Vec<&str> = workers
            .iter()
            .filter(|h| cells.contains(&h.work_cell))
            .map(|h| h.uid.as_str())
            .collect();
        let n = (region.reduction * eligible.len() as f64).round() as usize;
        eligible.shuffle(&mut rng::stream(&[spec.seed, TAG_TELECOMMUTE, ri as u64]));
        affected.extend(eligible.into_iter().take(n));
    }

    let by_uid: HashMap<&str, &HomeWork> = workers.iter().map(|h| (h.uid.as_str(), *h)).collect();
    let min_ticks = (SECS_PER_HOUR / ts.step()).max(1) as usize;
    let replacements: Vec<Option<(Vec<CellId>, usize)>> = ts
        .trajectories()
        .par_iter()
        .map(|t| {
            if !affected.contains(t.uid.as_str()) {
                return None;
            }
            let h = by_uid[t.uid.as_str()];
            let mut cells = t.cells.clone();
            let mut replaced = 0;
            for d in days.clone() {
                let r = ts.day_ticks(d);
                let at_work = cells[r.clone()].iter().filter(|c| **c == h.work_cell).count();
                if at_work >= min_ticks {
                    cells[r].fill(h.home_cell);
                    replaced += 1;
                }
            }
            Some((cells, replaced))
        })
        .collect();
    let mut replacements = replacements;
    report.days_replaced = replacements.iter().flatten().map(|r| r.1).sum();
    report.affected = affected.into_iter().map(str::to_string).collect();
    let out = ts.with_cells(|i, _| replacements[i].take().map(|r| r.0))?;
    Ok((out, report))
}
