use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{PolicyKind, PolicySpec};
use crate::error::{Error, Result};
use crate::geo::CellId;
use crate::mobility::TrajectorySet;

/// One screening policy: cells, active ticks and detection probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningWindow {
    pub policy: String,
    pub cells: BTreeSet<CellId>,
    pub ticks: Range<usize>,
    pub detect_prob: f64,
}

/// Merged screening windows, indexed by cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreeningPlan {
    windows: Vec<ScreeningWindow>,
    by_cell: BTreeMap<CellId, Vec<usize>>,
}

impl ScreeningPlan {
    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[ScreeningWindow] {
        &self.windows
    }

    /// Every cell screened by at least one window.
    pub fn cells(&self) -> impl Iterator<Item = &CellId> {
        self.by_cell.keys()
    }

    pub fn add(&mut self, w: ScreeningWindow) {
        let idx = self.windows.len();
        for c in &w.cells {
            self.by_cell.entry(*c).or_default().push(idx);
        }
        self.windows.push(w);
    }

    pub fn merge(&mut self, other: ScreeningPlan) {
        for w in other.windows {
            self.add(w);
        }
    }

    /// Detection probability in `cell` at `tick`: the largest among the
    /// windows active there, or `None` when unscreened.
    pub fn detect_prob(&self, cell: CellId, tick: usize) -> Option<f64> {
        self.by_cell.get(&cell).and_then(|ws| {
            ws.iter()
                .map(|&i| &self.windows[i])
                .filter(|w| w.ticks.contains(&tick))
                .map(|w| w.detect_prob)
                .reduce(f64::max)
        })
    }

    /// Cells with an active window at `tick`, in cell order.
    pub fn active_at(&self, tick: usize) -> Vec<(CellId, f64)> {
        self.by_cell
            .keys()
            .filter_map(|c| self.detect_prob(*c, tick).map(|p| (*c, p)))
            .collect()
    }
}

/// Validates a screening policy against `ts` and converts its day range to ticks.
pub fn compile_screening(spec: &PolicySpec, ts: &TrajectorySet) -> Result<ScreeningPlan> {
    let PolicyKind::Screening { cells, detect_prob } = &spec.kind else {
        return Err(Error::invalid("kind", "expected a screening policy"));
    };
    spec.validate()?;
    for c in cells {
        if !ts.grid().is_valid(*c) || ts.grid().resolution(*c) != ts.resolution() {
            return Err(Error::invalid(
                format!("{}.cells", spec.name),
                format!("{c} is not a cell of this dataset's grid"),
            ));
        }
    }
    let mut plan = ScreeningPlan::default();
    plan.add(ScreeningWindow {
        policy: spec.name.clone(),
        cells: cells.iter().copied().collect(),
        ticks: spec.tick_range(ts)?,
        detect_prob: *detect_prob,
    });
    Ok(plan)
}
