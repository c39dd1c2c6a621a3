//! Synthetic city: home/work/leisure zones and seeded daily itineraries.
//!
//! Commuters leave home to arrive at work between 09:00 and 11:00 local,
//! leave work between 17:00 and 19:00 on weekdays, and stay home on
//! weekends apart from optional afternoon leisure trips. Everyone else makes
//! up to two short excursions near home per day. Raw points are emitted
//! every 30 minutes while stationary and every 5 minutes while travelling.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_trajectory_set, DatasetOptions, RawPoint, RawTrajectory, TrajectorySet};
use crate::error::{Error, Result};
use crate::geo::LatLng;
use crate::risk::{Category, PoiRecord};
use crate::rng::{self, StreamRng, TAG_SYNTH_CITY, TAG_SYNTH_POI, TAG_SYNTH_USER};
use crate::time::{is_weekday, Horizon, SECS_PER_HOUR};

const STAY_SAMPLE_SECS: i64 = 1800;
const MOVE_SAMPLE_SECS: i64 = 300;
const TRAVEL_SPEED_MPS: f64 = 7.0;
const LOCAL_SPEED_MPS: f64 = 4.0;

fn tokyo() -> LatLng {
    LatLng {
        lat: 35.6812,
        lon: 139.7671,
    }
}
fn four() -> usize {
    4
}
fn three() -> usize {
    3
}
fn share() -> f64 {
    0.7
}
fn yes() -> bool {
    true
}
fn home_radius() -> f64 {
    1500.0
}
fn work_radius() -> f64 {
    400.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCitySpec {
    pub n_users: usize,
    #[serde(default = "tokyo")]
    pub center: LatLng,
    #[serde(default = "four")]
    pub n_home_zones: usize,
    #[serde(default = "three")]
    pub n_work_zones: usize,
    /// Explicit zone centers; generated around `center` when empty.
    #[serde(default)]
    pub home_zones: Vec<LatLng>,
    #[serde(default)]
    pub work_zones: Vec<LatLng>,
    #[serde(default)]
    pub leisure_zones: Vec<LatLng>,
    /// Relative popularity of each work zone; uniform when empty.
    #[serde(default)]
    pub work_zone_weights: Vec<f64>,
    /// Exact fraction of users who commute (rounded to whole users).
    #[serde(default = "share")]
    pub commute_share: f64,
    #[serde(default = "yes")]
    pub weekend_leisure: bool,
    #[serde(default = "home_radius")]
    pub home_radius_m: f64,
    #[serde(default = "work_radius")]
    pub work_radius_m: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SyntheticCitySpec {
    pub fn new(n_users: usize, rng_seed: u64) -> Self {
        Self {
            n_users,
            center: tokyo(),
            n_home_zones: four(),
            n_work_zones: three(),
            home_zones: Vec::new(),
            work_zones: Vec::new(),
            leisure_zones: Vec::new(),
            work_zone_weights: Vec::new(),
            commute_share: share(),
            weekend_leisure: true,
            home_radius_m: home_radius(),
            work_radius_m: work_radius(),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::invalid("n_users", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.commute_share) {
            return Err(Error::invalid("commute_share", "must lie in [0, 1]"));
        }
        LatLng::new(self.center.lat, self.center.lon)?;
        if self.home_zones.is_empty() && self.n_home_zones == 0 {
            return Err(Error::invalid("n_home_zones", "must be at least 1"));
        }
        if self.work_zones.is_empty() && self.n_work_zones == 0 {
            return Err(Error::invalid("n_work_zones", "must be at least 1"));
        }
        let n_work = if self.work_zones.is_empty() {
            self.n_work_zones
        } else {
            self.work_zones.len()
        };
        if !self.work_zone_weights.is_empty() {
            if self.work_zone_weights.len() != n_work {
                return Err(Error::invalid(
                    "work_zone_weights",
                    format!("expected {n_work} weights"),
                ));
            }
            if self.work_zone_weights.iter().any(|w| !(*w >= 0.0)) || self.work_zone_weights.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::invalid(
                    "work_zone_weights",
                    "weights must be non-negative with a positive sum",
                ));
            }
        }
        if !(self.home_radius_m >= 0.0 && self.work_radius_m >= 0.0) {
            return Err(Error::invalid("radius", "radii must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityZones {
    pub home: Vec<LatLng>,
    pub work: Vec<LatLng>,
    pub leisure: Vec<LatLng>,
}

/// Ground truth for one generated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAgent {
    pub uid: String,
    pub home: LatLng,
    pub work: Option<LatLng>,
    pub work_zone: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub zones: CityZones,
    pub agents: Vec<SyntheticAgent>,
    pub raw: Vec<RawTrajectory>,
    pub trajectories: TrajectorySet,
}

fn disk_point(rng: &mut StreamRng, center: LatLng, radius_m: f64) -> LatLng {
    let r = radius_m * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    center.offset_m(r * a.cos(), r * a.sin())
}

fn zones(spec: &SyntheticCitySpec) -> CityZones {
    let mut rng = rng::stream(&[spec.rng_seed, TAG_SYNTH_CITY]);
    let c = spec.center;
    let work = if spec.work_zones.is_empty() {
        (0..spec.n_work_zones)
            .map(|i| {
                if i == 0 {
                    c
                } else {
                    let a = rng.random::<f64>() * std::f64::consts::TAU;
                    let r = 1200.0 + 1300.0 * rng.random::<f64>();
                    c.offset_m(r * a.cos(), r * a.sin())
                }
            })
            .collect()
    } else {
        spec.work_zones.clone()
    };
    let home = if spec.home_zones.is_empty() {
        let n = spec.n_home_zones;
        (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64 + 0.4 * rng.random::<f64>();
                let r = 5000.0 + 3000.0 * rng.random::<f64>();
                c.offset_m(r * a.cos(), r * a.sin())
            })
            .collect()
    } else {
        spec.home_zones.clone()
    };
    let leisure = if spec.leisure_zones.is_empty() {
        (0..3)
            .map(|i| {
                let a = std::f64::consts::TAU * (f64::from(i) + 0.5) / 3.0;
                let r = 2500.0 + 1500.0 * rng.random::<f64>();
                c.offset_m(r * a.cos(), r * a.sin())
            })
            .collect()
    } else {
        spec.leisure_zones.clone()
    };
    CityZones { home, work, leisure }
}

fn pick_weighted(rng: &mut StreamRng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Itinerary builder: a strictly increasing list of (time, position) anchors.
struct Itinerary {
    anchors: Vec<(i64, LatLng)>,
}

impl Itinerary {
    fn at(&mut self, t: i64, p: LatLng) {
        match self.anchors.last() {
            Some((lt, _)) if t <= *lt => {}
            _ => self.anchors.push((t, p)),
        }
    }

    fn last_time(&self) -> i64 {
        self.anchors.last().map_or(i64::MIN, |a| a.0)
    }

    /// Leave `from` at `depart`, travel to `to`, stay until `until`, return.
    fn round_trip(&mut self, from: LatLng, to: LatLng, depart: i64, until: i64, speed: f64) -> i64 {
        let travel = ((from.distance_m(&to) / speed) as i64).max(MOVE_SAMPLE_SECS);
        let depart = depart.max(self.last_time() + 1);
        let arrive = depart + travel;
        let leave = until.max(arrive + 1);
        let back = leave + travel;
        self.at(depart, from);
        self.at(arrive, to);
        self.at(leave, to);
        self.at(back, from);
        back
    }

    fn sample(&self, horizon: Horizon) -> Vec<RawPoint> {
        let mut out = Vec::new();
        for w in self.anchors.windows(2) {
            let ((t0, p0), (t1, p1)) = (w[0], w[1]);
            let every = if p0 == p1 { STAY_SAMPLE_SECS } else { MOVE_SAMPLE_SECS };
            let mut t = t0;
            while t < t1 {
                let pos = p0.lerp(&p1, (t - t0) as f64 / (t1 - t0) as f64);
                out.push(RawPoint {
                    t,
                    lat: pos.lat,
                    lon: pos.lon,
                });
                t += every;
            }
        }
        if let Some((t, p)) = self.anchors.last() {
            out.push(RawPoint {
                t: *t,
                lat: p.lat,
                lon: p.lon,
            });
        }
        out.retain(|p| horizon.contains(p.t));
        out
    }
}

fn user_points(
    agent: &SyntheticAgent,
    spec: &SyntheticCitySpec,
    zones: &CityZones,
    horizon: Horizon,
    options: &DatasetOptions,
    rng: &mut StreamRng,
) -> Vec<RawPoint> {
    let clock = options.clock;
    let home = agent.home;
    let mut it = Itinerary { anchors: Vec::new() };
    it.at(horizon.start, home);
    let uniform = |rng: &mut StreamRng, lo_h: f64, hi_h: f64| -> i64 {
        ((lo_h + (hi_h - lo_h) * rng.random::<f64>()) * SECS_PER_HOUR as f64) as i64
    };
    for day in clock.day(horizon.start)..=clock.day(horizon.end - 1) {
        let d0 = clock.day_start(day);
        match (agent.work, is_weekday(day)) {
            (Some(work), true) => {
                let travel = ((home.distance_m(&work) / TRAVEL_SPEED_MPS) as i64).max(MOVE_SAMPLE_SECS);
                let arrive = d0 + uniform(rng, 9.0, 11.0);
                let leave = d0 + uniform(rng, 17.0, 19.0);
                it.round_trip(home, work, arrive - travel, leave, TRAVEL_SPEED_MPS);
            }
            (_, weekday) => {
                if !weekday && spec.weekend_leisure && rng.random::<f64>() < 0.5 {
                    let zone = zones.leisure[rng.random_range(0..zones.leisure.len())];
                    let spot = disk_point(rng, zone, 300.0);
                    let depart = d0 + uniform(rng, 12.0, 15.0);
                    let stay = uniform(rng, 1.0, 3.0);
                    let travel = (home.distance_m(&spot) / TRAVEL_SPEED_MPS) as i64;
                    it.round_trip(home, spot, depart, depart + travel + stay, TRAVEL_SPEED_MPS);
                } else if agent.work.is_none() {
                    let mut t = d0 + uniform(rng, 10.0, 11.0);
                    for _ in 0..rng.random_range(0..=2) {
                        if t > d0 + 17 * SECS_PER_HOUR {
                            break;
                        }
                        let spot = disk_point(rng, home, 1200.0);
                        let travel = (home.distance_m(&spot) / LOCAL_SPEED_MPS) as i64;
                        let stay = uniform(rng, 0.5, 1.5);
                        let back = it.round_trip(home, spot, t, t + travel + stay, LOCAL_SPEED_MPS);
                        t = back + uniform(rng, 0.0, 1.0);
                    }
                }
            }
        }
    }
    it.at(horizon.end - 1, home);
    it.sample(horizon)
}

/// Generates a seeded synthetic city over `horizon`. The same spec, horizon
/// and options always produce identical output.
pub fn generate_synthetic_city(
    spec: &SyntheticCitySpec,
    horizon: Horizon,
    options: DatasetOptions,
) -> Result<SyntheticCity> {
    spec.validate()?;
    horizon.ticks(options.step)?;
    let zones = zones(spec);
    let weights = if spec.work_zone_weights.is_empty() {
        vec![1.0; zones.work.len()]
    } else {
        spec.work_zone_weights.clone()
    };
    let n_commuters = (spec.commute_share * spec.n_users as f64).round() as usize;
    let mut order: Vec<usize> = (0..spec.n_users).collect();
    order.shuffle(&mut rng::stream(&[spec.rng_seed, TAG_SYNTH_CITY, 1]));
    let mut commuter = vec![false; spec.n_users];
    for &i in &order[..n_commuters] {
        commuter[i] = true;
    }

    let generated: Vec<(SyntheticAgent, RawTrajectory)> = (0..spec.n_users)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(&[spec.rng_seed, TAG_SYNTH_USER, i as u64]);
            let hz = zones.home[rng.random_range(0..zones.home.len())];
            let home = disk_point(&mut rng, hz, spec.home_radius_m);
            let (work, work_zone) = if commuter[i] {
                let z = pick_weighted(&mut rng, &weights);
                (Some(disk_point(&mut rng, zones.work[z], spec.work_radius_m)), Some(z))
            } else {
                (None, None)
            };
            let agent = SyntheticAgent {
                uid: format!("u{i:06}"),
                home,
                work,
                work_zone,
            };
            let points = user_points(&agent, spec, &zones, horizon, &options, &mut rng);
            let raw = RawTrajectory {
                uid: agent.uid.clone(),
                points,
            };
            (agent, raw)
        })
        .collect();
    let (agents, raw): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
    let (trajectories, _) = build_trajectory_set(&raw, horizon, options)?;
    Ok(SyntheticCity {
        zones,
        agents,
        raw,
        trajectories,
    })
}

/// POIs scattered around the city's zones. Work zones carry most nightlife
/// and restaurants in proportion to `weights` (uniform when empty).
pub fn generate_synthetic_pois(zones: &CityZones, weights: &[f64], seed: u64) -> Vec<PoiRecord> {
    let mut rng = rng::stream(&[seed, TAG_SYNTH_POI]);
    let mut out = Vec::new();
    let mut scatter = |rng: &mut StreamRng, center: LatLng, radius: f64, cat: &str, n: usize| {
        for _ in 0..n {
            let p = disk_point(rng, center, radius);
            out.push(PoiRecord {
                lat: p.lat,
                lon: p.lon,
                category: Category::new(cat),
                open_hours: None,
            });
        }
    };
    let total: f64 = if weights.is_empty() {
        zones.work.len() as f64
    } else {
        weights.iter().sum()
    };
    for (i, z) in zones.work.iter().enumerate() {
        let share = if weights.is_empty() { 1.0 } else { weights[i] } / total;
        let scale = |n: f64| (n * share * zones.work.len() as f64).round() as usize;
        scatter(&mut rng, *z, 500.0, "entertainment", scale(20.0));
        scatter(&mut rng, *z, 500.0, "restaurant", scale(40.0));
        scatter(&mut rng, *z, 500.0, "supermarket", scale(6.0));
        scatter(&mut rng, *z, 400.0, "office", scale(30.0));
        scatter(&mut rng, *z, 200.0, "station", 1);
    }
    for z in &zones.home {
        scatter(&mut rng, *z, 1500.0, "restaurant", 10);
        scatter(&mut rng, *z, 1500.0, "supermarket", 4);
        scatter(&mut rng, *z, 1500.0, "park", 2);
        scatter(&mut rng, *z, 1000.0, "station", 1);
    }
    for z in &zones.leisure {
        scatter(&mut rng, *z, 300.0, "entertainment", 8);
        scatter(&mut rng, *z, 300.0, "restaurant", 15);
        scatter(&mut rng, *z, 300.0, "supermarket", 5);
        scatter(&mut rng, *z, 300.0, "public_space", 2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::LocalClock;

    fn horizon(days: i64) -> Horizon {
        // Monday 2012-07-02 00:00 local.
        let start = LocalClock::default().day_start(15_523);
        Horizon::new(start, start + days * 86_400).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticCitySpec::new(30, 1);
        let a = generate_synthetic_city(&spec, horizon(3), DatasetOptions::default()).unwrap();
        let b = generate_synthetic_city(&spec, horizon(3), DatasetOptions::default()).unwrap();
        let mut ja = Vec::new();
        let mut jb = Vec::new();
        a.trajectories.write_jsonl(&mut ja).unwrap();
        b.trajectories.write_jsonl(&mut jb).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.raw, b.raw);
        let other =
            generate_synthetic_city(&SyntheticCitySpec::new(30, 2), horizon(3), DatasetOptions::default()).unwrap();
        assert_ne!(other.trajectories.dataset_id(), a.trajectories.dataset_id());
    }

    #[test]
    fn zero_users_rejected() {
        let spec = SyntheticCitySpec::new(0, 1);
        assert!(matches!(
            generate_synthetic_city(&spec, horizon(1), DatasetOptions::default()),
            Err(Error::InvalidInput { .. })
        ));
    }

    #[test]
    fn commute_share_is_exact() {
        let mut spec = SyntheticCitySpec::new(40, 3);
        spec.commute_share = 0.25;
        let city = generate_synthetic_city(&spec, horizon(1), DatasetOptions::default()).unwrap();
        assert_eq!(city.agents.iter().filter(|a| a.work.is_some()).count(), 10);
    }

    #[test]
    fn commuters_are_at_work_midday_on_weekdays() {
        let mut spec = SyntheticCitySpec::new(20, 5);
        spec.commute_share = 1.0;
        let opts = DatasetOptions::default();
        let city = generate_synthetic_city(&spec, horizon(7), opts).unwrap();
        let ts = &city.trajectories;
        for (agent, t) in city.agents.iter().zip(ts.trajectories()) {
            let work = opts.grid.cell_of_point(agent.work.unwrap(), opts.resolution);
            let home = opts.grid.cell_of_point(agent.home, opts.resolution);
            for d in ts.days() {
                let r = ts.day_ticks(d);
                let noon = r.start + 12 * 12;
                let three_am = r.start + 3 * 12;
                assert_eq!(t.cells[three_am], home);
                if is_weekday(d) {
                    assert_eq!(t.cells[noon], work, "user {} day {d}", agent.uid);
                }
            }
        }
    }

    #[test]
    fn raw_points_strictly_increasing() {
        let city =
            generate_synthetic_city(&SyntheticCitySpec::new(25, 9), horizon(7), DatasetOptions::default()).unwrap();
        for r in &city.raw {
            assert!(RawTrajectory::new(r.uid.clone(), r.points.clone()).is_ok());
        }
    }

    #[test]
    fn pois_follow_zones() {
        let spec = SyntheticCitySpec::new(1, 1);
        let z = zones(&spec);
        let pois = generate_synthetic_pois(&z, &[], 1);
        assert!(pois.iter().any(|p| p.category.as_str() == "entertainment"));
        assert_eq!(pois, generate_synthetic_pois(&z, &[], 1));
    }
}
