#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::NaiveDate;
use epimob::geo::{CellId, GeoPolygon, Grid, LatLng, Resolution};
use epimob::mobility::{
    generate_synthetic_city, DatasetOptions, GridTrajectory, SyntheticCity, SyntheticCitySpec, TrajectorySet,
};
use epimob::policy::{PolicyKind, PolicySpec};
use epimob::service::{Dataset, DatasetSource, SyntheticDatasetRequest};
use epimob::time::{date_to_day, Horizon};

pub const DESK_USERS: usize = 2000;
pub const DESK_DAYS: u32 = 14;

/// Monday, the default first day of synthetic datasets.
pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 4, 5).unwrap()
}

pub fn day(offset: u32) -> NaiveDate {
    start_date() + chrono::Days::new(u64::from(offset))
}

pub fn desk_request(seed: u64) -> SyntheticDatasetRequest {
    SyntheticDatasetRequest::new(SyntheticCitySpec::new(DESK_USERS, seed), DESK_DAYS)
}

pub fn desk_dataset(seed: u64) -> Dataset {
    Dataset::build(DatasetSource::Synthetic(desk_request(seed))).unwrap()
}

/// The city behind a synthetic request; zones and agents match the dataset.
pub fn city_of(req: &SyntheticDatasetRequest) -> SyntheticCity {
    let clock = req.options.clock;
    let start = clock.day_start(date_to_day(req.start));
    let horizon = Horizon::new(start, start + i64::from(req.days) * 86_400).unwrap();
    generate_synthetic_city(&req.spec, horizon, req.options).unwrap()
}

pub fn desk_city(seed: u64) -> SyntheticCity {
    city_of(&desk_request(seed))
}

pub fn cell(k: u32) -> CellId {
    Grid::default()
        .cell_of(35.60 + 0.02 * f64::from(k), 139.70, Resolution::DEFAULT)
        .unwrap()
}

/// A set with users `u0, u1, …` following `paths` from t = 0.
pub fn grid_fixture(paths: Vec<Vec<CellId>>, step: i64) -> TrajectorySet {
    grid_fixture_from(0, paths, step)
}

/// Like [`grid_fixture`], starting at local midnight of [`start_date`].
pub fn local_fixture(paths: Vec<Vec<CellId>>, step: i64) -> TrajectorySet {
    let start = DatasetOptions::default().clock.day_start(date_to_day(start_date()));
    grid_fixture_from(start, paths, step)
}

fn grid_fixture_from(start: i64, paths: Vec<Vec<CellId>>, step: i64) -> TrajectorySet {
    let ticks = paths[0].len() as i64;
    let opts = DatasetOptions {
        step,
        ..Default::default()
    };
    let trajectories = paths
        .into_iter()
        .enumerate()
        .map(|(i, cells)| GridTrajectory {
            uid: format!("u{i}"),
            start,
            step,
            cells,
        })
        .collect();
    TrajectorySet::new(
        trajectories,
        Horizon::new(start, start + ticks * step).unwrap(),
        opts,
        BTreeSet::new(),
    )
    .unwrap()
}

/// Axis-aligned square of half-width `half_m` metres around `c`.
pub fn square(c: LatLng, half_m: f64) -> GeoPolygon {
    GeoPolygon::new(vec![
        c.offset_m(-half_m, -half_m),
        c.offset_m(-half_m, half_m),
        c.offset_m(half_m, half_m),
        c.offset_m(half_m, -half_m),
    ])
    .unwrap()
}

pub fn lockdown(name: &str, start: NaiveDate, days: u32, polygons: Vec<GeoPolygon>) -> PolicySpec {
    PolicySpec {
        name: name.into(),
        start,
        days,
        seed: 11,
        kind: PolicyKind::Lockdown { polygons },
    }
}

/// One-sided Mann–Whitney test that `a` tends to be smaller than `b`,
/// normal approximation with tie correction. Returns z; reject at 5% when z > 1.645.
pub fn mann_whitney_z(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<(f64, usize)> = a.iter().map(|&x| (x, 0)).chain(b.iter().map(|&x| (x, 1))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let r_b: f64 = all.iter().zip(&ranks).filter(|(x, _)| x.1 == 1).map(|(_, r)| r).sum();
    let u_b = r_b - n2 * (n2 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let nn = n1 + n2;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if var == 0.0 {
        return 0.0;
    }
    (u_b - mean) / var.sqrt()
}
