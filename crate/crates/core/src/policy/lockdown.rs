use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PolicyKind, PolicySpec};
use crate::error::{Error, Result};
use crate::geo::CellId;
use crate::mobility::{HistoryIndex, TrajectorySet};
use crate::rng::{self, TAG_LOCKDOWN};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LockdownReport {
    pub policy: String,
    pub locked_cells: usize,
    /// Users inside the region when the lockdown starts.
    pub frozen: Vec<String>,
    /// User-days replaced by a clean historical day.
    pub days_from_history: usize,
    /// User-days with no clean history, replaced by the home cell.
    pub days_at_home: usize,
    /// User-days with no clean history and no usable home, held at the start-of-day cell.
    pub days_at_start_cell: usize,
}

enum Outcome {
    Untouched,
    Frozen(Vec<CellId>),
    Rerouted {
        cells: Vec<CellId>,
        history: usize,
        home: usize,
        start: usize,
    },
}

/// Freezes users inside the locked cells at the lockdown start and reroutes
/// everyone else: each day in range that touches the locked cells is
/// replaced by one of the user's own days (from `source`, drawn uniformly
/// with a per-user seed) that avoids them. Without such a day the user stays
/// at home, or at the day's first cell when home is unknown or locked.
pub fn apply_lockdown(
    ts: &TrajectorySet,
    source: &TrajectorySet,
    history: &HistoryIndex,
    spec: &PolicySpec,
    homes: &HashMap<&str, CellId>,
) -> Result<(TrajectorySet, LockdownReport)> {
    let PolicyKind::Lockdown { polygons } = &spec.kind else {
        return Err(Error::invalid("kind", "expected a lockdown policy"));
    };
    if polygons.is_empty() {
        return Err(Error::invalid(format!("{}.polygons", spec.name), "no regions given"));
    }
    let mut locked = BTreeSet::new();
    for p in polygons {
        locked.extend(ts.grid().cells_covering(p, ts.resolution())?);
    }
    if locked.is_empty() {
        return Err(Error::invalid(
            format!("{}.polygons", spec.name),
            "regions cover no cells",
        ));
    }
    let days = spec.day_range(ts)?;
    let ticks = spec.tick_range(ts)?;
    let clock = ts.clock();

    let outcomes: Vec<Outcome> = ts
        .trajectories()
        .par_iter()
        .map(|t| {
            let start_cell = t.cells[ticks.start];
            if locked.contains(&start_cell) {
                let mut cells = t.cells.clone();
                cells[ticks.clone()].fill(start_cell);
                return Outcome::Frozen(cells);
            }
            if !t.cells[ticks.clone()].iter().any(|c| locked.contains(c)) {
                return Outcome::Untouched;
            }
            let clean = history.days_avoiding(&t.uid, &locked);
            let src = source.get(&t.uid);
            let home = homes.get(t.uid.as_str()).copied().filter(|h| !locked.contains(h));
            let mut rng = rng::stream(&[spec.seed, TAG_LOCKDOWN, rng::hash_str(&t.uid)]);
            let mut cells = t.cells.clone();
            let (mut n_hist, mut n_home, mut n_start) = (0, 0, 0);
            for d in days.clone() {
                let r = ts.day_ticks(d);
                if !cells[r.clone()].iter().any(|c| locked.contains(c)) {
                    continue;
                }
                match (clean.is_empty(), src) {
                    (false, Some(src)) => {
                        let e = clean[rng.random_range(0..clean.len())];
                        // Copy by time of day, clamping into partial source days.
                        let src_day0 = clock.day_start(e.day);
                        let dst_day0 = clock.day_start(d);
                        for k in r {
                            let offset = ts.time_of(k) - dst_day0;
                            let at = source.tick_at_or_after(src_day0 + offset);
                            let at = at.clamp(e.ticks.start, e.ticks.end - 1);
                            cells[k] = src.cells[at];
                        }
                        n_hist += 1;
                    }
                    _ => {
                        let fallback = match home {
                            Some(h) => {
                                n_home += 1;
                                h
                            }
                            None => {
                                n_start += 1;
                                // The tick before a replaced day is always clean: either
                                // an earlier processed day or the unlocked start cell.
                                if locked.contains(&cells[r.start]) && r.start > 0 {
                                    cells[r.start - 1]
                                } else {
                                    cells[r.start]
                                }
                            }
                        };
                        cells[r].fill(fallback);
                    }
                }
            }
            Outcome::Rerouted {
                cells,
                history: n_hist,
                home: n_home,
                start: n_start,
            }
        })
        .collect();

    let mut report = LockdownReport {
        policy: spec.name.clone(),
        locked_cells: locked.len(),
        ..Default::default()
    };
    let mut replacements: Vec<Option<Vec<CellId>>> = Vec::with_capacity(outcomes.len());
    for (t, o) in ts.trajectories().iter().zip(outcomes) {
        replacements.push(match o {
            Outcome::Untouched => None,
            Outcome::Frozen(c) => {
                report.frozen.push(t.uid.clone());
                Some(c)
            }
            Outcome::Rerouted {
                cells,
                history,
                home,
                start,
            } => {
                report.days_from_history += history;
                report.days_at_home += home;
                report.days_at_start_cell += start;
                Some(cells)
            }
        });
    }
    let out = ts.with_cells(|i, _| replacements[i].take())?;
    Ok((out, report))
}
