//! Trajectories: raw GPS points, constant-rate grid trajectories, the
//! citywide [`TrajectorySet`], and the per-user day index used by lockdown
//! replacement.

mod history;
mod ingest;
mod interpolate;
mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::{CellId, Grid, LatLng, Resolution};
use crate::time::{Horizon, LocalClock};

pub use history::{DayEntry, HistoryIndex};
pub use ingest::{ingest_trajectories, IngestReport, ParseMode};
pub use interpolate::{build_trajectory_set, interpolate_and_map, BuildReport, Interpolated};
pub use synthetic::{
    generate_synthetic_city, generate_synthetic_pois, CityZones, SyntheticAgent, SyntheticCity, SyntheticCitySpec,
};

pub const DEFAULT_STEP_SECS: i64 = 300;
/// Gaps longer than this are interpolated but flagged.
pub const LONG_GAP_SECS: i64 = 6 * 3600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
}

impl RawPoint {
    pub fn pos(&self) -> LatLng {
        LatLng {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// A user's observed points, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub uid: String,
    pub points: Vec<RawPoint>,
}

impl RawTrajectory {
    pub fn new(uid: impl Into<String>, points: Vec<RawPoint>) -> Result<Self> {
        let uid = uid.into();
        if points.is_empty() {
            return Err(Error::invalid("points", format!("user {uid} has no points")));
        }
        if points.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(
                "points",
                format!("timestamps of user {uid} are not strictly increasing"),
            ));
        }
        Ok(Self { uid, points })
    }
}

/// Spatial and temporal settings shared by every trajectory in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default = "default_step")]
    pub step: i64,
    #[serde(default)]
    pub clock: LocalClock,
    /// Drop users whose longest observation gap exceeds this many seconds.
    #[serde(default)]
    pub max_gap_secs: Option<i64>,
}

fn default_step() -> i64 {
    DEFAULT_STEP_SECS
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            grid: Grid::default(),
            resolution: Resolution::DEFAULT,
            step: DEFAULT_STEP_SECS,
            clock: LocalClock::default(),
            max_gap_secs: None,
        }
    }
}

/// One cell per tick of `step` seconds starting at `start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridTrajectory {
    pub uid: String,
    pub start: i64,
    pub step: i64,
    pub cells: Vec<CellId>,
}

impl GridTrajectory {
    pub fn time_of(&self, tick: usize) -> i64 {
        self.start + tick as i64 * self.step
    }
}

/// Citywide mobility: equally sampled grid trajectories over one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    horizon: Horizon,
    options: DatasetOptions,
    trajectories: Vec<GridTrajectory>,
    dataset_id: String,
    /// Users whose source data had a gap longer than [`LONG_GAP_SECS`].
    flagged: BTreeSet<String>,
}

impl TrajectorySet {
    /// Validates the shared-shape invariants and sorts members by uid.
    pub fn new(
        mut trajectories: Vec<GridTrajectory>,
        horizon: Horizon,
        options: DatasetOptions,
        flagged: BTreeSet<String>,
    ) -> Result<Self> {
        let ticks = horizon.ticks(options.step)?;
        trajectories.sort_by(|a, b| a.uid.cmp(&b.uid));
        for w in trajectories.windows(2) {
            if w[0].uid == w[1].uid {
                return Err(Error::invalid("uid", format!("duplicate uid {}", w[0].uid)));
            }
        }
        for t in &trajectories {
            if t.start != horizon.start || t.step != options.step || t.cells.len() != ticks {
                return Err(Error::invalid(
                    "trajectories",
                    format!("trajectory {} does not match the horizon grid", t.uid),
                ));
            }
        }
        let mut set = Self {
            horizon,
            options,
            trajectories,
            dataset_id: String::new(),
            flagged,
        };
        set.dataset_id = set.content_hash();
        Ok(set)
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.horizon.start.to_le_bytes());
        h.update(self.horizon.end.to_le_bytes());
        h.update(serde_json::to_vec(&self.options).expect("options serialize"));
        for t in &self.trajectories {
            h.update((t.uid.len() as u64).to_le_bytes());
            h.update(t.uid.as_bytes());
            for c in &t.cells {
                h.update(c.raw().to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn options(&self) -> &DatasetOptions {
        &self.options
    }

    pub fn step(&self) -> i64 {
        self.options.step
    }

    pub fn clock(&self) -> LocalClock {
        self.options.clock
    }

    pub fn grid(&self) -> &Grid {
        &self.options.grid
    }

    pub fn resolution(&self) -> Resolution {
        self.options.resolution
    }

    pub fn ticks(&self) -> usize {
        (self.horizon.len_secs() / self.options.step) as usize
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[GridTrajectory] {
        &self.trajectories
    }

    pub fn flagged(&self) -> &BTreeSet<String> {
        &self.flagged
    }

    pub fn get(&self, uid: &str) -> Option<&GridTrajectory> {
        self.index_of(uid).map(|i| &self.trajectories[i])
    }

    pub fn index_of(&self, uid: &str) -> Option<usize> {
        self.trajectories.binary_search_by(|t| t.uid.as_str().cmp(uid)).ok()
    }

    pub fn time_of(&self, tick: usize) -> i64 {
        self.horizon.start + tick as i64 * self.options.step
    }

    /// Local calendar days touched by the horizon, in order.
    pub fn days(&self) -> Range<i64> {
        let clock = self.clock();
        clock.day(self.horizon.start)..clock.day(self.horizon.end - 1) + 1
    }

    /// Ticks falling on local day `day` (empty when outside the horizon).
    pub fn day_ticks(&self, day: i64) -> Range<usize> {
        let clock = self.clock();
        let lo = self.tick_at_or_after(clock.day_start(day));
        let hi = self.tick_at_or_after(clock.day_start(day + 1));
        lo..hi.max(lo)
    }

    /// First tick whose time is ≥ `t`, clamped to `0..=ticks`.
    pub fn tick_at_or_after(&self, t: i64) -> usize {
        let step = self.options.step;
        let off = t - self.horizon.start;
        if off <= 0 {
            return 0;
        }
        let k = (off + step - 1) / step;
        (k as usize).min(self.ticks())
    }

    /// Replaces member trajectories, keeping uids, horizon and options.
    /// Used by policy transforms; the shape of every replacement is checked.
    pub fn with_cells(&self, mut replace: impl FnMut(usize, &GridTrajectory) -> Option<Vec<CellId>>) -> Result<Self> {
        let trajectories = self
            .trajectories
            .iter()
            .enumerate()
            .map(|(i, t)| match replace(i, t) {
                Some(cells) => GridTrajectory {
                    uid: t.uid.clone(),
                    start: t.start,
                    step: t.step,
                    cells,
                },
                None => t.clone(),
            })
            .collect();
        Self::new(trajectories, self.horizon, self.options, self.flagged.clone())
    }

    /// JSON Lines, one user per line: `{"uid":…,"start":…,"step":300,"cells":[…]}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, horizon: Horizon, options: DatasetOptions) -> Result<Self> {
        let mut trajectories = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: GridTrajectory = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
            trajectories.push(t);
        }
        Self::new(trajectories, horizon, options, BTreeSet::new())
    }

    /// Fraction of all trajectory points falling in each (cell, hour-of-week) slot.
    pub fn occupancy(&self) -> HashMap<(CellId, usize), f64> {
        let clock = self.clock();
        let slots: Vec<usize> = (0..self.ticks()).map(|k| clock.slot_of_week(self.time_of(k))).collect();
        let mut counts: HashMap<(CellId, usize), u64> = HashMap::new();
        for t in &self.trajectories {
            for (k, c) in t.cells.iter().enumerate() {
                *counts.entry((*c, slots[k])).or_default() += 1;
            }
        }
        let total = (self.ticks() * self.len()) as f64;
        counts.into_iter().map(|(k, n)| (k, n as f64 / total)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> DatasetOptions {
        DatasetOptions::default()
    }

    fn traj(uid: &str, cells: Vec<CellId>) -> GridTrajectory {
        GridTrajectory {
            uid: uid.into(),
            start: 0,
            step: 300,
            cells,
        }
    }

    #[test]
    fn set_rejects_duplicates_and_shape_mismatch() {
        let h = Horizon::new(0, 900).unwrap();
        let c = CellId::from_raw(1);
        assert!(TrajectorySet::new(
            vec![traj("a", vec![c; 3]), traj("a", vec![c; 3])],
            h,
            opts(),
            BTreeSet::new()
        )
        .is_err());
        assert!(TrajectorySet::new(vec![traj("a", vec![c; 2])], h, opts(), BTreeSet::new()).is_err());
    }

    #[test]
    fn dataset_id_ignores_member_order() {
        let h = Horizon::new(0, 600).unwrap();
        let (c, d) = (CellId::from_raw(1), CellId::from_raw(2));
        let a = TrajectorySet::new(
            vec![traj("a", vec![c, d]), traj("b", vec![d, d])],
            h,
            opts(),
            BTreeSet::new(),
        )
        .unwrap();
        let b = TrajectorySet::new(
            vec![traj("b", vec![d, d]), traj("a", vec![c, d])],
            h,
            opts(),
            BTreeSet::new(),
        )
        .unwrap();
        assert_eq!(a.dataset_id(), b.dataset_id());
        let other = a.with_cells(|i, _| (i == 0).then(|| vec![d, d])).unwrap();
        assert_ne!(a.dataset_id(), other.dataset_id());
    }

    #[test]
    fn day_ticks_follow_local_midnight() {
        let clock = LocalClock::default();
        let day0 = clock.day(1_341_100_800);
        let start = clock.day_start(day0);
        let h = Horizon::new(start, start + 2 * 86_400).unwrap();
        let c = CellId::from_raw(1);
        let set = TrajectorySet::new(vec![traj_at("a", start, vec![c; 576])], h, opts(), BTreeSet::new()).unwrap();
        assert_eq!(set.days(), day0..day0 + 2);
        assert_eq!(set.day_ticks(day0), 0..288);
        assert_eq!(set.day_ticks(day0 + 1), 288..576);
        assert_eq!(set.day_ticks(day0 + 2), 576..576);
    }

    fn traj_at(uid: &str, start: i64, cells: Vec<CellId>) -> GridTrajectory {
        GridTrajectory {
            uid: uid.into(),
            start,
            step: 300,
            cells,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let h = Horizon::new(0, 600).unwrap();
        let c = CellId::from_raw(0xf8ab);
        let set = TrajectorySet::new(vec![traj("u1", vec![c, c])], h, opts(), BTreeSet::new()).unwrap();
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            line.trim(),
            r#"{"uid":"u1","start":0,"step":300,"cells":["f8ab","f8ab"]}"#
        );
        let back = TrajectorySet::read_jsonl(&buf[..], h, opts()).unwrap();
        assert_eq!(back.dataset_id(), set.dataset_id());
    }

    #[test]
    fn occupancy_sums_to_one() {
        let h = Horizon::new(0, 900).unwrap();
        let (c, d) = (CellId::from_raw(1), CellId::from_raw(2));
        let set = TrajectorySet::new(
            vec![traj("a", vec![c, c, d]), traj("b", vec![d, d, d])],
            h,
            opts(),
            BTreeSet::new(),
        )
        .unwrap();
        let occ = set.occupancy();
        let total: f64 = occ.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
