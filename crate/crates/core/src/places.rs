//! Stay points and home/workplace inference.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geo::{CellId, Grid, LatLng, Resolution};
use crate::mobility::RawTrajectory;
use crate::time::{is_weekday, Horizon, LocalClock, SECS_PER_HOUR};

pub const DEFAULT_MIN_STAY_SECS: i64 = 3600;
pub const DEFAULT_STAY_RADIUS_M: f64 = 500.0;
pub const DEFAULT_STAY_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StayPoint {
    pub uid: String,
    pub cell: CellId,
    pub arrive: i64,
    pub depart: i64,
    pub anchor: LatLng,
}

impl StayPoint {
    pub fn duration(&self) -> i64 {
        self.depart - self.arrive
    }
}

/// Greedy anchor scan: a stay opens at point `i` and absorbs the following
/// points while they stay within `radius_m` of point `i`. It is kept when the
/// absorbed span lasts at least `min_duration` seconds, and the scan resumes
/// after it; otherwise the scan resumes at `i + 1`.
///
/// A kept stay is re-anchored at the median of its points when every point
/// lies within `radius_m` of that median. The opening point is often the tail
/// of an approach path, which would otherwise put homes near a cell border in
/// whichever cell the user happened to arrive from.
pub fn extract_stay_points(
    raw: &RawTrajectory,
    min_duration: i64,
    radius_m: f64,
    grid: &Grid,
    res: Resolution,
) -> Vec<StayPoint> {
    let pts = &raw.points;
    let mut out = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        let anchor = pts[i].pos();
        let mut j = i;
        while j + 1 < pts.len() && anchor.distance_m(&pts[j + 1].pos()) <= radius_m {
            j += 1;
        }
        if pts[j].t - pts[i].t >= min_duration {
            let span = &pts[i..=j];
            let median = LatLng::new(median(span.iter().map(|p| p.lat)), median(span.iter().map(|p| p.lon)));
            let anchor = match median {
                Ok(m) if span.iter().all(|p| m.distance_m(&p.pos()) <= radius_m) => m,
                _ => anchor,
            };
            out.push(StayPoint {
                uid: raw.uid.clone(),
                cell: grid.cell_of_point(anchor, res),
                arrive: pts[i].t,
                depart: pts[j].t,
                anchor,
            });
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeWork {
    pub uid: String,
    pub home_cell: CellId,
    pub work_cell: CellId,
    pub home_rate: f64,
    pub work_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    NoStayPoints,
    NoHomeStay,
    NoWorkStay,
    HomeBelowThreshold { rate: f64 },
    WorkBelowThreshold { rate: f64 },
    SameCell { cell: CellId },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NoStayPoints => write!(f, "no stay points"),
            Rejection::NoHomeStay => write!(f, "no stay during home hours"),
            Rejection::NoWorkStay => write!(f, "no stay during working hours"),
            Rejection::HomeBelowThreshold { rate } => write!(f, "home stay rate {rate:.3} below threshold"),
            Rejection::WorkBelowThreshold { rate } => write!(f, "work stay rate {rate:.3} below threshold"),
            Rejection::SameCell { cell } => write!(f, "home and work share cell {cell}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomeWorkParams {
    pub threshold: f64,
    pub min_duration: i64,
    pub radius_m: f64,
    pub allow_same_cell: bool,
    /// Local hours `[start, end)` counted toward home.
    pub home_hours: (u32, u32),
    /// Local hours `[start, end)` counted toward work, weekdays only.
    pub work_hours: (u32, u32),
    pub clock: LocalClock,
    pub grid: Grid,
    pub resolution: Resolution,
}

impl Default for HomeWorkParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_STAY_THRESHOLD,
            min_duration: DEFAULT_MIN_STAY_SECS,
            radius_m: DEFAULT_STAY_RADIUS_M,
            allow_same_cell: false,
            home_hours: (0, 6),
            work_hours: (11, 17),
            clock: LocalClock::default(),
            grid: Grid::default(),
            resolution: Resolution::DEFAULT,
        }
    }
}

/// Home/work windows for every local day of `horizon`, clipped to it.
fn windows(horizon: Horizon, p: &HomeWorkParams) -> (Vec<(i64, i64)>, Vec<(i64, i64)>) {
    let clock = p.clock;
    let clip = |a: i64, b: i64| (a.max(horizon.start), b.min(horizon.end));
    let mut home = Vec::new();
    let mut work = Vec::new();
    for day in clock.day(horizon.start)..=clock.day(horizon.end - 1) {
        let d0 = clock.day_start(day);
        let h = clip(
            d0 + i64::from(p.home_hours.0) * SECS_PER_HOUR,
            d0 + i64::from(p.home_hours.1) * SECS_PER_HOUR,
        );
        if h.0 < h.1 {
            home.push(h);
        }
        if is_weekday(day) {
            let w = clip(
                d0 + i64::from(p.work_hours.0) * SECS_PER_HOUR,
                d0 + i64::from(p.work_hours.1) * SECS_PER_HOUR,
            );
            if w.0 < w.1 {
                work.push(w);
            }
        }
    }
    (home, work)
}

fn accumulate(stays: &[StayPoint], windows: &[(i64, i64)]) -> BTreeMap<CellId, i64> {
    let mut per_cell = BTreeMap::new();
    for s in stays {
        for &(a, b) in windows {
            let overlap = s.depart.min(b) - s.arrive.max(a);
            if overlap > 0 {
                *per_cell.entry(s.cell).or_insert(0) += overlap;
            }
        }
    }
    per_cell
}

/// Cell with the longest total; ties go to the smallest cell id.
fn argmax(per_cell: &BTreeMap<CellId, i64>) -> Option<(CellId, i64)> {
    per_cell
        .iter()
        .fold(None, |best: Option<(CellId, i64)>, (c, v)| match best {
            Some((_, bv)) if bv >= *v => best,
            _ => Some((*c, *v)),
        })
}

/// Infers home and workplace from stays clipped to the home and work hour
/// windows of `horizon`. Each rate is the time spent in the winning cell
/// divided by the total window length over the horizon.
pub fn extract_home_work(
    raw: &RawTrajectory,
    horizon: Horizon,
    p: &HomeWorkParams,
) -> std::result::Result<HomeWork, Rejection> {
    let stays = extract_stay_points(raw, p.min_duration, p.radius_m, &p.grid, p.resolution);
    if stays.is_empty() {
        return Err(Rejection::NoStayPoints);
    }
    let (home_w, work_w) = windows(horizon, p);
    let home_total: i64 = home_w.iter().map(|(a, b)| b - a).sum();
    let work_total: i64 = work_w.iter().map(|(a, b)| b - a).sum();
    let (home_cell, home_secs) = argmax(&accumulate(&stays, &home_w)).ok_or(Rejection::NoHomeStay)?;
    let (work_cell, work_secs) = argmax(&accumulate(&stays, &work_w)).ok_or(Rejection::NoWorkStay)?;
    let home_rate = home_secs as f64 / home_total as f64;
    let work_rate = work_secs as f64 / work_total as f64;
    if home_rate < p.threshold {
        return Err(Rejection::HomeBelowThreshold { rate: home_rate });
    }
    if work_rate < p.threshold {
        return Err(Rejection::WorkBelowThreshold { rate: work_rate });
    }
    if home_cell == work_cell && !p.allow_same_cell {
        return Err(Rejection::SameCell { cell: home_cell });
    }
    Ok(HomeWork {
        uid: raw.uid.clone(),
        home_cell,
        work_cell,
        home_rate,
        work_rate,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HomeWorkTable {
    pub found: Vec<HomeWork>,
    pub rejected: Vec<(String, Rejection)>,
}

impl HomeWorkTable {
    pub fn by_uid(&self) -> HashMap<&str, &HomeWork> {
        self.found.iter().map(|h| (h.uid.as_str(), h)).collect()
    }

    /// CSV `uid,home_cell,work_cell,home_rate,work_rate`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["uid", "home_cell", "work_cell", "home_rate", "work_rate"])
            .map_err(std::io::Error::from)?;
        for h in &self.found {
            out.write_record([
                h.uid.clone(),
                h.home_cell.to_string(),
                h.work_cell.to_string(),
                format!("{:.6}", h.home_rate),
                format!("{:.6}", h.work_rate),
            ])
            .map_err(std::io::Error::from)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs [`extract_home_work`] for every user in parallel, preserving input order.
pub fn extract_home_work_all(raws: &[RawTrajectory], horizon: Horizon, p: &HomeWorkParams) -> HomeWorkTable {
    let results: Vec<_> = raws
        .par_iter()
        .map(|r| (r.uid.clone(), extract_home_work(r, horizon, p)))
        .collect();
    let mut table = HomeWorkTable::default();
    for (uid, r) in results {
        match r {
            Ok(h) => table.found.push(h),
            Err(e) => table.rejected.push((uid, e)),
        }
    }
    table
}

/// Number of workers per cell after aggregating work cells to `res`.
pub fn workplace_heatmap(hw: &[HomeWork], grid: &Grid, res: Resolution) -> Result<BTreeMap<CellId, u32>> {
    let mut counts = BTreeMap::new();
    for h in hw {
        *counts.entry(grid.aggregate(h.work_cell, res)?).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::RawPoint;

    const P: LatLng = LatLng {
        lat: 35.68,
        lon: 139.76,
    };

    fn traj(points: Vec<(i64, LatLng)>) -> RawTrajectory {
        RawTrajectory::new(
            "u",
            points
                .into_iter()
                .map(|(t, p)| RawPoint {
                    t,
                    lat: p.lat,
                    lon: p.lon,
                })
                .collect(),
        )
        .unwrap()
    }

    fn stays(r: &RawTrajectory) -> Vec<StayPoint> {
        extract_stay_points(r, 3600, 500.0, &Grid::default(), Resolution::DEFAULT)
    }

    #[test]
    fn fixed_two_hours_is_one_stay() {
        let r = traj((0..=24).map(|k| (k * 300, P)).collect());
        let s = stays(&r);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].duration(), 7200);
    }

    #[test]
    fn moving_user_has_no_stays() {
        let r = traj((0..30).map(|k| (k * 600, P.offset_m(0.0, k as f64 * 1000.0))).collect());
        assert!(stays(&r).is_empty());
    }

    #[test]
    fn short_then_long_stay() {
        // 50 min at P, jump 2 km, 90 min at Q: only the second qualifies.
        let q = P.offset_m(2000.0, 0.0);
        let mut pts: Vec<(i64, LatLng)> = (0..=10).map(|k| (k * 300, P)).collect();
        pts.extend((0..=18).map(|k| (3300 + k * 300, q)));
        let s = stays(&traj(pts));
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].arrive, s[0].depart), (3300, 3300 + 5400));
        assert_eq!(s[0].anchor, q);
    }

    fn day0() -> i64 {
        LocalClock::default().day_start(15_523) // Monday
    }

    #[test]
    fn split_workplace_rejected() {
        // Weekday work hours split evenly between two distant offices.
        let h = P;
        let (w1, w2) = (P.offset_m(3000.0, 0.0), P.offset_m(-3000.0, 0.0));
        let mut pts = Vec::new();
        for d in 0..7 {
            let d0 = day0() + d * 86_400;
            pts.push((d0, h));
            pts.push((d0 + 8 * 3600, h));
            let w = if d % 2 == 0 { w1 } else { w2 };
            pts.push((d0 + 10 * 3600, w));
            pts.push((d0 + 18 * 3600, w));
            pts.push((d0 + 20 * 3600, h));
        }
        pts.push((day0() + 7 * 86_400 - 1, h));
        let horizon = Horizon::new(day0(), day0() + 7 * 86_400).unwrap();
        match extract_home_work(&traj(pts), horizon, &HomeWorkParams::default()) {
            Err(Rejection::WorkBelowThreshold { rate }) => assert!((rate - 0.6).abs() < 1e-9, "{rate}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn three_way_split_rejected() {
        // 20 h / 19 h / 18 h of work-hour stays across three cells over 30 days.
        let horizon = Horizon::new(day0(), day0() + 30 * 86_400).unwrap();
        let offices = [
            P.offset_m(3000.0, 0.0),
            P.offset_m(-3000.0, 0.0),
            P.offset_m(0.0, 3000.0),
        ];
        let mut pts: Vec<(i64, LatLng)> = (0..30)
            .flat_map(|d| {
                let d0 = day0() + d * 86_400;
                // Home overnight, then a brief stop elsewhere each morning.
                [
                    (d0, P),
                    (d0 + 6 * 3600, P),
                    (d0 + 7 * 3600, P.offset_m(0.0, -5000.0 - d as f64 * 900.0)),
                ]
            })
            .collect();
        let mut d = 0;
        for (o, hours) in offices.iter().zip([20, 19, 18]) {
            let mut left = hours;
            while left > 0 {
                let d0 = day0() + d * 86_400;
                d += 1;
                if !is_weekday(15_523 + d - 1) {
                    continue;
                }
                let h = left.min(6);
                pts.push((d0 + 11 * 3600, *o));
                pts.push((d0 + (11 + h) * 3600, *o));
                left -= h;
            }
        }
        pts.sort_by_key(|p| p.0);
        match extract_home_work(&traj(pts), horizon, &HomeWorkParams::default()) {
            Err(Rejection::WorkBelowThreshold { rate }) => assert!(rate < 0.2, "{rate}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn argmax_tie_takes_smallest_cell() {
        let m: BTreeMap<CellId, i64> = [(CellId::from_raw(9), 5), (CellId::from_raw(3), 5)].into();
        assert_eq!(argmax(&m), Some((CellId::from_raw(3), 5)));
    }

    #[test]
    fn heatmap_basics() {
        let grid = Grid::default();
        let c = grid.cell_of_point(P, Resolution::DEFAULT);
        let hw: Vec<HomeWork> = (0..3)
            .map(|i| HomeWork {
                uid: format!("u{i}"),
                home_cell: c,
                work_cell: c,
                home_rate: 1.0,
                work_rate: 1.0,
            })
            .collect();
        assert_eq!(
            workplace_heatmap(&hw, &grid, Resolution::DEFAULT).unwrap(),
            [(c, 3)].into()
        );
        assert!(workplace_heatmap(&[], &grid, Resolution::DEFAULT).unwrap().is_empty());
    }

    #[test]
    fn csv_export_header() {
        let t = HomeWorkTable {
            found: vec![HomeWork {
                uid: "a".into(),
                home_cell: CellId::from_raw(0xab),
                work_cell: CellId::from_raw(0xcd),
                home_rate: 1.0,
                work_rate: 0.8,
            }],
            rejected: vec![],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "uid,home_cell,work_cell,home_rate,work_rate\na,ab,cd,1.000000,0.800000\n"
        );
    }
}
