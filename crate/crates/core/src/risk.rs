//! POI ingestion and the transmission-rate field.
//!
//! Each cell's rate is `β_base + Δ`, where `Δ = k · R` and `R` sums the risk
//! values of the POIs open in that cell during the hour. `β_base` is chosen
//! so that the weighted mean rate over the dataset equals `β_global`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CellId, Grid, LatLng, Resolution};
use crate::mobility::{ParseMode, TrajectorySet};
use crate::time::{LocalClock, SECS_PER_HOUR};

pub const SLOTS_PER_WEEK: usize = 168;
pub const DEFAULT_K: f64 = 0.0003;
pub const DEFAULT_BETA_GLOBAL: f64 = 0.302;

/// Built-in POI categories. Extra categories can be registered at runtime.
pub const DEFAULT_CATEGORIES: &[&str] = &[
    "entertainment",
    "restaurant",
    "supermarket",
    "station",
    "public_space",
    "park",
    "forest_park",
    "office",
    "school",
    "hospital",
    "clinic",
    "hotel",
    "retail",
    "convenience_store",
    "bank",
    "post_office",
    "museum",
    "religious",
    "sports",
    "government",
    "factory",
    "residential",
];

const ALIASES: &[(&str, &str)] = &[
    ("entertainment_place", "entertainment"),
    ("supermarket_shopping_mall", "supermarket"),
    ("supermarket_and_shopping_mall", "supermarket"),
    ("shopping_mall", "supermarket"),
    ("subway_bus_station", "station"),
    ("subway_and_bus_station", "station"),
];

/// A normalized category name: lowercase ASCII words joined by `_`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct Category(String);

impl Category {
    pub fn new(raw: &str) -> Self {
        let mut s = String::with_capacity(raw.len());
        for ch in raw.trim().chars() {
            if ch.is_alphanumeric() {
                s.extend(ch.to_lowercase());
            } else if !s.is_empty() && !s.ends_with('_') {
                s.push('_');
            }
        }
        while s.ends_with('_') {
            s.pop();
        }
        match ALIASES.iter().find(|(a, _)| *a == s) {
            Some((_, canon)) => Self((*canon).to_string()),
            None => Self(s),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for Category {
    fn from(s: String) -> Self {
        Self::new(&s)
    }
}

impl From<Category> for String {
    fn from(c: Category) -> Self {
        c.0
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRegistry {
    known: BTreeSet<Category>,
}

impl Default for CategoryRegistry {
    fn default() -> Self {
        Self {
            known: DEFAULT_CATEGORIES.iter().map(|c| Category::new(c)).collect(),
        }
    }
}

impl CategoryRegistry {
    pub fn register(&mut self, name: &str) -> Category {
        let c = Category::new(name);
        self.known.insert(c.clone());
        c
    }

    pub fn contains(&self, c: &Category) -> bool {
        self.known.contains(c)
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.known.iter()
    }
}

/// Daily local opening interval `[open, close)` in seconds of the day.
/// `close <= open` wraps past midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpenInterval {
    pub open: u32,
    pub close: u32,
}

impl OpenInterval {
    pub fn hours(open: u32, close: u32) -> Self {
        Self {
            open: open * 3600 % 86_400,
            close: close * 3600 % 86_400,
        }
    }

    pub fn contains(&self, secs_of_day: u32) -> bool {
        if self.open < self.close {
            (self.open..self.close).contains(&secs_of_day)
        } else if self.open == self.close {
            true
        } else {
            secs_of_day >= self.open || secs_of_day < self.close
        }
    }
}

fn parse_hhmm(s: &str) -> Option<u32> {
    let (h, m) = s.trim().split_once(':')?;
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (h <= 24 && m < 60 && h * 60 + m <= 1440).then_some((h * 3600 + m * 60) % 86_400)
}

impl FromStr for OpenInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("open_hours", format!("expected `HH:MM-HH:MM`, got {s:?}"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        Ok(Self {
            open: parse_hhmm(a).ok_or_else(bad)?,
            close: parse_hhmm(b).ok_or_else(bad)?,
        })
    }
}

impl fmt::Display for OpenInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hm = |s: u32| format!("{:02}:{:02}", s / 3600, s % 3600 / 60);
        write!(f, "{}-{}", hm(self.open), hm(self.close))
    }
}

impl Serialize for OpenInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OpenInterval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Default schedule used when a POI has no opening hours of its own.
pub fn default_schedule(category: &Category) -> Vec<OpenInterval> {
    let iv = match category.as_str() {
        "entertainment" => OpenInterval::hours(18, 2),
        "restaurant" => OpenInterval::hours(11, 23),
        "supermarket" => OpenInterval::hours(10, 21),
        _ => OpenInterval::hours(9, 18),
    };
    vec![iv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiRecord {
    pub lat: f64,
    pub lon: f64,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_hours: Option<Vec<OpenInterval>>,
}

impl PoiRecord {
    pub fn pos(&self) -> LatLng {
        LatLng {
            lat: self.lat,
            lon: self.lon,
        }
    }

    pub fn schedule(&self) -> Vec<OpenInterval> {
        self.open_hours
            .clone()
            .unwrap_or_else(|| default_schedule(&self.category))
    }
}

/// POIs of one category sharing one schedule within a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiGroup {
    pub category: Category,
    pub schedule: Vec<OpenInterval>,
    pub count: u32,
}

impl PoiGroup {
    pub fn is_open(&self, secs_of_day: u32) -> bool {
        self.schedule.iter().any(|iv| iv.contains(secs_of_day))
    }
}

/// Per-cell POI counts with schedules, plus the located records for map layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoiCounts {
    pub resolution: Resolution,
    cells: BTreeMap<CellId, Vec<PoiGroup>>,
    records: Vec<PoiRecord>,
}

impl PoiCounts {
    pub fn build(records: Vec<PoiRecord>, grid: &Grid, res: Resolution) -> Self {
        let mut cells: BTreeMap<CellId, Vec<PoiGroup>> = BTreeMap::new();
        for r in &records {
            let cell = grid.cell_of_point(r.pos(), res);
            let schedule = r.schedule();
            let groups = cells.entry(cell).or_default();
            match groups
                .iter_mut()
                .find(|g| g.category == r.category && g.schedule == schedule)
            {
                Some(g) => g.count += 1,
                None => groups.push(PoiGroup {
                    category: r.category.clone(),
                    schedule,
                    count: 1,
                }),
            }
        }
        Self {
            resolution: res,
            cells,
            records,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[PoiRecord] {
        &self.records
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellId, &[PoiGroup])> {
        self.cells.iter().map(|(c, g)| (c, g.as_slice()))
    }

    pub fn groups(&self, cell: CellId) -> &[PoiGroup] {
        self.cells.get(&cell).map_or(&[], |g| g.as_slice())
    }

    pub fn count(&self, cell: CellId, category: &Category) -> u32 {
        self.groups(cell)
            .iter()
            .filter(|g| &g.category == category)
            .map(|g| g.count)
            .sum()
    }

    /// `[lon, lat]` points of the requested categories (all when empty), grouped per category.
    pub fn layers(&self, categories: &[Category]) -> BTreeMap<Category, Vec<[f64; 2]>> {
        let mut out: BTreeMap<Category, Vec<[f64; 2]>> = BTreeMap::new();
        for c in categories {
            out.entry(c.clone()).or_default();
        }
        for r in &self.records {
            if categories.is_empty() || categories.contains(&r.category) {
                out.entry(r.category.clone()).or_default().push([r.lon, r.lat]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct PoiIngest {
    pub records: Vec<PoiRecord>,
    pub skipped: Vec<(u64, String)>,
}

/// Reads a `lat,lon,category[,open,close]` CSV. `open`/`close` are local
/// `HH:MM`; rows without them use the category default. An empty source
/// yields no records.
pub fn ingest_pois<R: Read>(source: R, registry: &CategoryRegistry, mode: ParseMode) -> Result<PoiIngest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = PoiIngest::default();
    for (i, rec) in reader.records().enumerate() {
        let (line, row) = match rec {
            Ok(r) => (r.position().map_or(i as u64 + 1, |p| p.line()), Ok(r)),
            Err(e) => (e.position().map_or(i as u64 + 1, |p| p.line()), Err(e.to_string())),
        };
        if i == 0 {
            if let Ok(r) = &row {
                if r.get(0) == Some("lat") {
                    if r.get(1) != Some("lon") || r.get(2) != Some("category") {
                        return Err(Error::Parse {
                            line,
                            message: "expected header `lat,lon,category[,open,close]`".into(),
                        });
                    }
                    continue;
                }
            }
        }
        match row.and_then(|r| parse_poi(&r, registry)) {
            Ok(p) => out.records.push(p),
            Err(message) => match mode {
                ParseMode::FailFast => return Err(Error::Parse { line, message }),
                ParseMode::Lenient => out.skipped.push((line, message)),
            },
        }
    }
    Ok(out)
}

fn parse_poi(rec: &csv::StringRecord, registry: &CategoryRegistry) -> std::result::Result<PoiRecord, String> {
    if !(rec.len() == 3 || rec.len() == 5) {
        return Err(format!("expected 3 or 5 fields, found {}", rec.len()));
    }
    let lat: f64 = rec[0].parse().map_err(|_| format!("bad latitude {:?}", &rec[0]))?;
    let lon: f64 = rec[1].parse().map_err(|_| format!("bad longitude {:?}", &rec[1]))?;
    LatLng::new(lat, lon).map_err(|e| e.to_string())?;
    let category = Category::new(&rec[2]);
    if !registry.contains(&category) {
        return Err(format!("unknown category {:?}", &rec[2]));
    }
    let open_hours = if rec.len() == 5 && !(rec[3].is_empty() && rec[4].is_empty()) {
        let open = parse_hhmm(&rec[3]).ok_or_else(|| format!("bad open time {:?}", &rec[3]))?;
        let close = parse_hhmm(&rec[4]).ok_or_else(|| format!("bad close time {:?}", &rec[4]))?;
        Some(vec![OpenInterval { open, close }])
    } else {
        None
    };
    Ok(PoiRecord {
        lat,
        lon,
        category,
        open_hours,
    })
}

/// Per-category risk values `r_i` and the scale factor `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    #[serde(default = "default_risk_values")]
    pub risk_values: BTreeMap<Category, f64>,
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_risk_values() -> BTreeMap<Category, f64> {
    [("entertainment", 8.0), ("restaurant", 2.0), ("supermarket", 1.0)]
        .into_iter()
        .map(|(c, r)| (Category::new(c), r))
        .collect()
}

fn default_k() -> f64 {
    DEFAULT_K
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            risk_values: default_risk_values(),
            k: DEFAULT_K,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid("risk.k", "must be non-negative"));
        }
        for (c, r) in &self.risk_values {
            if !(*r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("risk.risk_values.{c}"), "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn risk_of(&self, c: &Category) -> f64 {
        self.risk_values.get(c).copied().unwrap_or(0.0)
    }
}

/// `R = Σ_i p_i · r_i` over the POIs of `cell` open at `secs_of_day` local.
pub fn cumulative_risk(counts: &PoiCounts, risk: &RiskConfig, cell: CellId, secs_of_day: u32) -> f64 {
    counts
        .groups(cell)
        .iter()
        .filter(|g| g.is_open(secs_of_day))
        .map(|g| f64::from(g.count) * risk.risk_of(&g.category))
        .sum()
}

/// How the `β_base` mean weights (cell, slot) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Fraction of trajectory points in each (cell, hour-of-week) slot.
    #[default]
    Occupancy,
    /// Equal weight for every slot of every cell holding trajectory points or POIs.
    Uniform,
}

/// Neumaier-compensated sum.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `β_base = β_global − Σ w·Δ`. `delta` misses mean Δ = 0.
pub fn derive_beta_base<K: Eq + std::hash::Hash>(
    beta_global: f64,
    delta: &HashMap<K, f64>,
    weights: &HashMap<K, f64>,
) -> f64 {
    let mut terms: Vec<(&K, f64)> = weights
        .iter()
        .filter_map(|(k, w)| delta.get(k).map(|d| (k, w * d)))
        .collect();
    // Sum in a fixed order so the result does not depend on hash iteration.
    terms.sort_by(|a, b| a.1.total_cmp(&b.1));
    beta_global - kahan_sum(terms.into_iter().map(|t| t.1))
}

/// Per-(cell, hour-of-week) rate increments and the derived base rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskField {
    pub slot_secs: i64,
    pub beta_global: f64,
    pub beta_base: f64,
    pub clock: LocalClock,
    delta: HashMap<CellId, Vec<f64>>,
    pub warnings: Vec<String>,
}

impl RiskField {
    /// A field with no POI effect: every cell has rate `beta_global`.
    pub fn uniform(beta_global: f64, clock: LocalClock) -> Self {
        Self {
            slot_secs: SECS_PER_HOUR,
            beta_global,
            beta_base: beta_global,
            clock,
            delta: HashMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Builds Δ for every POI cell and derives `β_base` from `ts`'s occupancy.
    pub fn build(
        ts: &TrajectorySet,
        pois: &PoiCounts,
        risk: &RiskConfig,
        beta_global: f64,
        weighting: Weighting,
    ) -> Result<Self> {
        risk.validate()?;
        if !(beta_global >= 0.0 && beta_global.is_finite()) {
            return Err(Error::invalid("beta_global", "must be non-negative"));
        }
        let grid = ts.grid();
        let res = ts.resolution();
        let mut delta: HashMap<CellId, Vec<f64>> = HashMap::new();
        for (src, groups) in pois.cells() {
            // POIs indexed at another resolution are re-bucketed by cell center.
            let cell = if pois.resolution == res {
                *src
            } else {
                grid.cell_of_point(grid.center(*src), res)
            };
            let row = delta.entry(cell).or_insert_with(|| vec![0.0; SLOTS_PER_WEEK]);
            for (slot, d) in row.iter_mut().enumerate() {
                let secs = ((slot as i64 % 24) * SECS_PER_HOUR) as u32;
                let r: f64 = groups
                    .iter()
                    .filter(|g| g.is_open(secs))
                    .map(|g| f64::from(g.count) * risk.risk_of(&g.category))
                    .sum();
                *d += risk.k * r;
            }
        }
        delta.retain(|_, row| row.iter().any(|d| *d != 0.0));

        let weights: HashMap<(CellId, usize), f64> = match weighting {
            Weighting::Occupancy => ts.occupancy(),
            Weighting::Uniform => {
                let mut cells: BTreeSet<CellId> = delta.keys().copied().collect();
                for t in ts.trajectories() {
                    cells.extend(t.cells.iter().copied());
                }
                let w = 1.0 / (cells.len() * SLOTS_PER_WEEK) as f64;
                cells
                    .into_iter()
                    .flat_map(|c| (0..SLOTS_PER_WEEK).map(move |s| ((c, s), w)))
                    .collect()
            }
        };
        let flat: HashMap<(CellId, usize), f64> = delta
            .iter()
            .flat_map(|(c, row)| row.iter().enumerate().map(move |(s, d)| ((*c, s), *d)))
            .collect();
        let beta_base = derive_beta_base(beta_global, &flat, &weights);
        let mut field = Self {
            slot_secs: SECS_PER_HOUR,
            beta_global,
            beta_base,
            clock: ts.clock(),
            delta,
            warnings: Vec::new(),
        };
        if beta_base < 0.0 {
            field.warnings.push(format!(
                "beta_base = {beta_base:.6} is negative; rates are clamped at 0 where beta_base + delta < 0"
            ));
        }
        Ok(field)
    }

    /// Assembles a field from explicit increments (tests and tools).
    pub fn from_parts(
        beta_global: f64,
        beta_base: f64,
        clock: LocalClock,
        delta: HashMap<CellId, Vec<f64>>,
    ) -> Result<Self> {
        if delta
            .values()
            .any(|r| r.len() != SLOTS_PER_WEEK || r.iter().any(|d| !(*d >= 0.0)))
        {
            return Err(Error::invalid("delta", "each row needs 168 non-negative slots"));
        }
        Ok(Self {
            slot_secs: SECS_PER_HOUR,
            beta_global,
            beta_base,
            clock,
            delta,
            warnings: Vec::new(),
        })
    }

    pub fn delta(&self, cell: CellId, slot: usize) -> f64 {
        self.delta.get(&cell).map_or(0.0, |r| r[slot])
    }

    pub fn cells(&self) -> impl Iterator<Item = &CellId> {
        self.delta.keys()
    }

    pub fn has_cell(&self, cell: CellId) -> bool {
        self.delta.contains_key(&cell)
    }

    /// Per-day rate at hour-of-week `slot`.
    pub fn beta_slot(&self, cell: CellId, slot: usize) -> f64 {
        (self.beta_base + self.delta(cell, slot)).max(0.0)
    }

    /// Per-day rate in `cell` at UTC time `t`.
    pub fn beta_at(&self, cell: CellId, t: i64) -> f64 {
        self.beta_slot(cell, self.clock.slot_of_week(t))
    }

    /// `Σ w · β` over the given weights.
    pub fn weighted_mean(&self, weights: &HashMap<(CellId, usize), f64>) -> f64 {
        let mut terms: Vec<f64> = weights.iter().map(|((c, s), w)| w * self.beta_slot(*c, *s)).collect();
        terms.sort_by(f64::total_cmp);
        kahan_sum(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_normalization() {
        assert_eq!(Category::new("Forest Park").as_str(), "forest_park");
        assert_eq!(Category::new("Entertainment Place").as_str(), "entertainment");
        assert_eq!(Category::new("Supermarket & Shopping Mall").as_str(), "supermarket");
        assert_eq!(Category::new("  Restaurant ").as_str(), "restaurant");
    }

    #[test]
    fn wraparound_intervals() {
        let ent = OpenInterval::hours(18, 2);
        assert!(ent.contains(23 * 3600));
        assert!(ent.contains(3600));
        assert!(!ent.contains(2 * 3600));
        assert!(!ent.contains(12 * 3600));
        assert_eq!("18:00-02:00".parse::<OpenInterval>().unwrap(), ent);
        assert_eq!(ent.to_string(), "18:00-02:00");
    }

    #[test]
    fn two_restaurants_same_point() {
        let csv = "lat,lon,category\n35.68,139.76,Restaurant\n35.68,139.76,restaurant\n";
        let ing = ingest_pois(csv.as_bytes(), &CategoryRegistry::default(), ParseMode::FailFast).unwrap();
        let grid = Grid::default();
        let counts = PoiCounts::build(ing.records, &grid, Resolution::DEFAULT);
        let c = grid.cell_of(35.68, 139.76, Resolution::DEFAULT).unwrap();
        assert_eq!(counts.count(c, &Category::new("restaurant")), 2);
    }

    #[test]
    fn forest_park_counted_with_zero_risk() {
        let csv = "35.68,139.76,Forest Park\n";
        let ing = ingest_pois(csv.as_bytes(), &CategoryRegistry::default(), ParseMode::FailFast).unwrap();
        let grid = Grid::default();
        let counts = PoiCounts::build(ing.records, &grid, Resolution::DEFAULT);
        let c = grid.cell_of(35.68, 139.76, Resolution::DEFAULT).unwrap();
        assert_eq!(counts.count(c, &Category::new("forest_park")), 1);
        assert_eq!(cumulative_risk(&counts, &RiskConfig::default(), c, 12 * 3600), 0.0);
        assert_eq!(
            counts
                .layers(&[Category::new("forest_park")])
                .values()
                .next()
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn empty_file_and_unknown_category() {
        let reg = CategoryRegistry::default();
        assert!(ingest_pois("".as_bytes(), &reg, ParseMode::FailFast)
            .unwrap()
            .records
            .is_empty());
        let csv = "lat,lon,category\n35.0,139.0,spaceport\n35.0,139.0,restaurant\n";
        assert!(matches!(
            ingest_pois(csv.as_bytes(), &reg, ParseMode::FailFast),
            Err(Error::Parse { line: 2, .. })
        ));
        let lenient = ingest_pois(csv.as_bytes(), &reg, ParseMode::Lenient).unwrap();
        assert_eq!(lenient.skipped.len(), 1);
        assert_eq!(lenient.records.len(), 1);
    }

    #[test]
    fn explicit_hours_override_default() {
        let csv = "35.0,139.0,restaurant,06:00,08:30\n";
        let ing = ingest_pois(csv.as_bytes(), &CategoryRegistry::default(), ParseMode::FailFast).unwrap();
        assert_eq!(ing.records[0].schedule(), vec!["06:00-08:30".parse().unwrap()]);
    }

    fn toy_counts(ent: usize, rest: usize) -> (PoiCounts, CellId) {
        let grid = Grid::default();
        let mut recs = Vec::new();
        for _ in 0..ent {
            recs.push(PoiRecord {
                lat: 35.68,
                lon: 139.76,
                category: Category::new("entertainment"),
                open_hours: Some(vec![OpenInterval::hours(0, 0)]),
            });
        }
        for _ in 0..rest {
            recs.push(PoiRecord {
                lat: 35.68,
                lon: 139.76,
                category: Category::new("restaurant"),
                open_hours: Some(vec![OpenInterval::hours(0, 0)]),
            });
        }
        let c = grid.cell_of(35.68, 139.76, Resolution::DEFAULT).unwrap();
        (PoiCounts::build(recs, &grid, Resolution::DEFAULT), c)
    }

    #[test]
    fn cumulative_risk_hand_value() {
        let (counts, c) = toy_counts(2, 1);
        let r = cumulative_risk(&counts, &RiskConfig::default(), c, 20 * 3600);
        assert_eq!(r, 18.0);
        assert!((DEFAULT_K * r - 0.0054).abs() < 1e-15);
    }

    #[test]
    fn default_schedules_close_at_four() {
        let grid = Grid::default();
        let recs = vec![
            PoiRecord {
                lat: 35.68,
                lon: 139.76,
                category: Category::new("entertainment"),
                open_hours: None,
            },
            PoiRecord {
                lat: 35.68,
                lon: 139.76,
                category: Category::new("restaurant"),
                open_hours: None,
            },
        ];
        let counts = PoiCounts::build(recs, &grid, Resolution::DEFAULT);
        let c = grid.cell_of(35.68, 139.76, Resolution::DEFAULT).unwrap();
        assert_eq!(cumulative_risk(&counts, &RiskConfig::default(), c, 4 * 3600), 0.0);
        assert_eq!(cumulative_risk(&counts, &RiskConfig::default(), c, 22 * 3600), 10.0);
    }

    #[test]
    fn beta_base_examples() {
        let none: HashMap<u8, f64> = HashMap::new();
        let w: HashMap<u8, f64> = [(0, 0.5), (1, 0.5)].into();
        assert_eq!(derive_beta_base(0.302, &none, &w), 0.302);
        let uniform: HashMap<u8, f64> = [(0, 0.0054), (1, 0.0054)].into();
        assert!((derive_beta_base(0.302, &uniform, &w) - 0.2966).abs() < 1e-12);
        let toy: HashMap<u8, f64> = [(0, 0.0), (1, 0.01)].into();
        assert!((derive_beta_base(0.302, &toy, &w) - (0.302 - 0.005)).abs() < 1e-12);
    }

    #[test]
    fn beta_at_rules() {
        let clock = LocalClock::default();
        let c = CellId::from_raw(1);
        let mut delta = HashMap::new();
        delta.insert(c, vec![0.0054; SLOTS_PER_WEEK]);
        let f = RiskField::from_parts(0.302, 0.2966, clock, delta).unwrap();
        assert_eq!(f.beta_at(CellId::from_raw(2), 0), 0.2966);
        assert!((f.beta_at(c, 0) - 0.302).abs() < 1e-12);
        let neg = RiskField::from_parts(0.302, -0.01, clock, HashMap::new()).unwrap();
        assert_eq!(neg.beta_at(c, 0), 0.0);
    }

    #[test]
    fn risk_config_json() {
        let cfg: RiskConfig =
            serde_json::from_str(r#"{"risk_values":{"Entertainment Place":8,"restaurant":2},"k":0.0003}"#).unwrap();
        assert_eq!(cfg.risk_of(&Category::new("entertainment")), 8.0);
        assert_eq!(cfg.risk_of(&Category::new("supermarket")), 0.0);
        let back: RiskConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<RiskConfig>(r#"{"k":-1}"#)
            .unwrap()
            .validate()
            .is_err());
    }
}
