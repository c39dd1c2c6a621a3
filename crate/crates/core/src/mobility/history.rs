use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use super::TrajectorySet;
use crate::geo::CellId;

/// One user-day of the source trajectories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayEntry {
    pub day: i64,
    /// Tick range of this day in the source set.
    pub ticks: Range<usize>,
    /// Distinct cells visited, sorted.
    pub cells: Vec<CellId>,
}

impl DayEntry {
    pub fn avoids(&self, cells: &BTreeSet<CellId>) -> bool {
        !self.cells.iter().any(|c| cells.contains(c))
    }
}

/// Per-user, per-local-day visited cells with a reverse cell → (user, day)
/// index. Immutable once built.
#[derive(Debug, Clone)]
pub struct HistoryIndex {
    uids: Vec<String>,
    by_uid: HashMap<String, usize>,
    days: Vec<Vec<DayEntry>>,
    visitors: HashMap<CellId, Vec<(u32, i64)>>,
}

impl HistoryIndex {
    pub fn build(ts: &TrajectorySet) -> Self {
        let day_ranges: Vec<(i64, Range<usize>)> = ts
            .days()
            .map(|d| (d, ts.day_ticks(d)))
            .filter(|(_, r)| !r.is_empty())
            .collect();
        let mut uids = Vec::with_capacity(ts.len());
        let mut by_uid = HashMap::with_capacity(ts.len());
        let mut days = Vec::with_capacity(ts.len());
        let mut visitors: HashMap<CellId, Vec<(u32, i64)>> = HashMap::new();
        for (u, t) in ts.trajectories().iter().enumerate() {
            let entries: Vec<DayEntry> = day_ranges
                .iter()
                .map(|(d, r)| {
                    let cells: BTreeSet<CellId> = t.cells[r.clone()].iter().copied().collect();
                    DayEntry {
                        day: *d,
                        ticks: r.clone(),
                        cells: cells.into_iter().collect(),
                    }
                })
                .collect();
            for e in &entries {
                for c in &e.cells {
                    visitors.entry(*c).or_default().push((u as u32, e.day));
                }
            }
            by_uid.insert(t.uid.clone(), u);
            uids.push(t.uid.clone());
            days.push(entries);
        }
        Self {
            uids,
            by_uid,
            days,
            visitors,
        }
    }

    pub fn users(&self) -> &[String] {
        &self.uids
    }

    pub fn days_of(&self, uid: &str) -> &[DayEntry] {
        self.by_uid.get(uid).map(|&u| self.days[u].as_slice()).unwrap_or(&[])
    }

    pub fn entry(&self, uid: &str, day: i64) -> Option<&DayEntry> {
        self.days_of(uid).iter().find(|e| e.day == day)
    }

    /// Days of `uid` on which none of `cells` was visited.
    pub fn days_avoiding(&self, uid: &str, cells: &BTreeSet<CellId>) -> Vec<&DayEntry> {
        self.days_of(uid).iter().filter(|e| e.avoids(cells)).collect()
    }

    /// `(user index, day)` pairs that visited any of `cells`, sorted and deduplicated.
    pub fn visits(&self, cells: &BTreeSet<CellId>) -> Vec<(usize, i64)> {
        let mut out: BTreeSet<(usize, i64)> = BTreeSet::new();
        for c in cells {
            if let Some(v) = self.visitors.get(c) {
                out.extend(v.iter().map(|&(u, d)| (u as usize, d)));
            }
        }
        out.into_iter().collect()
    }

    pub fn user_index(&self, uid: &str) -> Option<usize> {
        self.by_uid.get(uid).copied()
    }
}
