//! Hexagonal spatial indexing.
//!
//! Coordinates map to opaque 64-bit [`CellId`]s through a [`Grid`] backend.
//! The backend also covers polygons with cells and maps cells to coarser
//! resolutions for multi-scale aggregation.

mod flat;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use flat::FlatHexGrid;

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Opaque cell identifier. Serialized as a lowercase hexadecimal string.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(u64);

impl CellId {
    pub const fn from_raw(raw: u64) -> Self {
        Self(raw)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

impl fmt::Debug for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellId({:x})", self.0)
    }
}

impl FromStr for CellId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        u64::from_str_radix(s.trim(), 16)
            .map(CellId)
            .map_err(|_| Error::invalid("cell", format!("not a hexadecimal cell id: {s:?}")))
    }
}

impl Serialize for CellId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Grid resolution level in `0..=15`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Resolution(u8);

impl Resolution {
    pub const DEFAULT: Resolution = Resolution(8);
    pub const MAX: u8 = 15;

    pub fn new(level: u8) -> Result<Self> {
        if level > Self::MAX {
            return Err(Error::invalid("resolution", format!("level {level} is above 15")));
        }
        Ok(Self(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<u8> for Resolution {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Resolution::new(v)
    }
}

impl From<Resolution> for u8 {
    fn from(r: Resolution) -> u8 {
        r.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLng {
    pub lat: f64,
    pub lon: f64,
}

impl LatLng {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || lat.is_nan() {
            return Err(Error::invalid("lat", format!("{lat} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) || lon.is_nan() {
            return Err(Error::invalid("lon", format!("{lon} outside [-180, 180]")));
        }
        Ok(Self { lat, lon })
    }

    /// Great-circle distance in meters.
    pub fn distance_m(&self, other: &LatLng) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }

    /// Point reached by moving `north_m` and `east_m` meters on a local tangent plane.
    pub fn offset_m(&self, north_m: f64, east_m: f64) -> LatLng {
        let dlat = (north_m / EARTH_RADIUS_M).to_degrees();
        let dlon = (east_m / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        LatLng {
            lat: (self.lat + dlat).clamp(-90.0, 90.0),
            lon: (self.lon + dlon).clamp(-180.0, 180.0),
        }
    }

    pub fn lerp(&self, other: &LatLng, frac: f64) -> LatLng {
        LatLng {
            lat: self.lat + (other.lat - self.lat) * frac,
            lon: self.lon + (other.lon - self.lon) * frac,
        }
    }
}

/// Closed, simple polygon given as a ring of `[lat, lon]` vertices.
/// A repeated closing vertex is accepted and dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct GeoPolygon {
    ring: Vec<LatLng>,
}

impl GeoPolygon {
    pub fn new(mut ring: Vec<LatLng>) -> Result<Self> {
        for p in &ring {
            LatLng::new(p.lat, p.lon)?;
        }
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::invalid("polygon", "a ring needs at least 3 vertices"));
        }
        let poly = Self { ring };
        if !poly.is_degenerate() && poly.self_intersects() {
            return Err(Error::invalid("polygon", "ring is self-intersecting"));
        }
        Ok(poly)
    }

    pub fn from_lat_lon(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(points.iter().map(|&(lat, lon)| LatLng { lat, lon }).collect())
    }

    pub fn ring(&self) -> &[LatLng] {
        &self.ring
    }

    /// Shoelace area in squared degrees, relative to the first vertex.
    pub fn signed_area_deg2(&self) -> f64 {
        let o = self.ring[0];
        let n = self.ring.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.ring[i], self.ring[(i + 1) % n]);
                (a.lon - o.lon) * (b.lat - o.lat) - (b.lon - o.lon) * (a.lat - o.lat)
            })
            .sum::<f64>()
            / 2.0
    }

    /// Zero-area ring: all vertices collinear (or coincident).
    pub fn is_degenerate(&self) -> bool {
        let o = (self.ring[0].lon, self.ring[0].lat);
        let far = self
            .ring
            .iter()
            .map(|p| (p.lon, p.lat))
            .max_by(|a, b| {
                let da = (a.0 - o.0).hypot(a.1 - o.1);
                let db = (b.0 - o.0).hypot(b.1 - o.1);
                da.total_cmp(&db)
            })
            .expect("non-empty ring");
        let len = (far.0 - o.0).hypot(far.1 - o.1);
        if len < 1e-12 {
            return true;
        }
        self.ring
            .iter()
            .all(|p| (orient(o, far, (p.lon, p.lat)) / len).abs() < 1e-12)
    }

    pub fn centroid(&self) -> LatLng {
        let n = self.ring.len() as f64;
        LatLng {
            lat: self.ring.iter().map(|p| p.lat).sum::<f64>() / n,
            lon: self.ring.iter().map(|p| p.lon).sum::<f64>() / n,
        }
    }

    pub fn contains(&self, p: &LatLng) -> bool {
        let pts: Vec<(f64, f64)> = self.ring.iter().map(|v| (v.lon, v.lat)).collect();
        point_in_ring(&pts, (p.lon, p.lat))
    }

    fn self_intersects(&self) -> bool {
        let n = self.ring.len();
        let seg = |i: usize| {
            let a = self.ring[i];
            let b = self.ring[(i + 1) % n];
            ((a.lon, a.lat), (b.lon, b.lat))
        };
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if adjacent {
                    // Adjacent edges share one vertex; they only conflict when they fold back.
                    if collinear_overlap(a, b, c, d) {
                        return true;
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }
}

impl TryFrom<Vec<[f64; 2]>> for GeoPolygon {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        GeoPolygon::new(v.into_iter().map(|[lat, lon]| LatLng { lat, lon }).collect())
    }
}

impl From<GeoPolygon> for Vec<[f64; 2]> {
    fn from(p: GeoPolygon) -> Self {
        p.ring.iter().map(|v| [v.lat, v.lon]).collect()
    }
}

type Pt = (f64, f64);

fn orient(a: Pt, b: Pt, c: Pt) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: Pt, b: Pt, p: Pt) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(a: Pt, b: Pt, c: Pt, d: Pt) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn collinear_overlap(a: Pt, b: Pt, c: Pt, d: Pt) -> bool {
    if orient(a, b, c) != 0.0 || orient(a, b, d) != 0.0 {
        return false;
    }
    // Shared endpoint is expected; overlap means the other endpoint lies on the first segment.
    let shared = [c, d].into_iter().find(|p| *p == a || *p == b);
    let other = match shared {
        Some(s) if s == c => d,
        Some(_) => c,
        None => return on_segment(a, b, c) || on_segment(a, b, d),
    };
    let far = if shared == Some(a) { b } else { a };
    on_segment(a, b, other) || on_segment(c, d, far)
}

/// Even-odd crossing test.
pub(crate) fn point_in_ring(ring: &[Pt], p: Pt) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Grid backend selection. Cell ids are only meaningful within the backend
/// that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Grid {
    Flat(FlatHexGrid),
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Flat(FlatHexGrid::default())
    }
}

impl Grid {
    pub fn cell_of(&self, lat: f64, lon: f64, res: Resolution) -> Result<CellId> {
        let p = LatLng::new(lat, lon)?;
        Ok(self.cell_of_point(p, res))
    }

    /// Like [`Grid::cell_of`] for an already validated point.
    pub fn cell_of_point(&self, p: LatLng, res: Resolution) -> CellId {
        match self {
            Grid::Flat(g) => g.cell_of(p, res),
        }
    }

    pub fn resolution(&self, cell: CellId) -> Resolution {
        match self {
            Grid::Flat(_) => FlatHexGrid::resolution(cell),
        }
    }

    pub fn is_valid(&self, cell: CellId) -> bool {
        match self {
            Grid::Flat(_) => FlatHexGrid::is_valid(cell),
        }
    }

    pub fn center(&self, cell: CellId) -> LatLng {
        match self {
            Grid::Flat(g) => g.center(cell),
        }
    }

    /// Closed boundary ring, first vertex repeated at the end.
    pub fn boundary(&self, cell: CellId) -> Vec<LatLng> {
        match self {
            Grid::Flat(g) => g.boundary(cell),
        }
    }

    /// GeoJSON-ordered `[lon, lat]` closed ring for rendering.
    pub fn boundary_geojson(&self, cell: CellId) -> Vec<[f64; 2]> {
        self.boundary(cell).iter().map(|p| [p.lon, p.lat]).collect()
    }

    /// All cells within `k` steps of `cell`, including `cell`.
    pub fn grid_disk(&self, cell: CellId, k: u32) -> Vec<CellId> {
        match self {
            Grid::Flat(g) => g.grid_disk(cell, k),
        }
    }

    /// Mean cell area in km² at a resolution.
    pub fn cell_area_km2(&self, res: Resolution) -> f64 {
        match self {
            Grid::Flat(g) => g.cell_area_km2(res),
        }
    }

    /// Maps `cell` to the cell containing it at a strictly coarser resolution.
    pub fn parent_cell(&self, cell: CellId, coarser: Resolution) -> Result<CellId> {
        let own = self.resolution(cell);
        if coarser >= own {
            return Err(Error::invalid(
                "resolution",
                format!(
                    "parent resolution {} must be coarser than {}",
                    coarser.level(),
                    own.level()
                ),
            ));
        }
        Ok(match self {
            Grid::Flat(g) => g.parent(cell, coarser),
        })
    }

    /// Identity at the cell's own resolution, the parent at a coarser one.
    pub fn aggregate(&self, cell: CellId, res: Resolution) -> Result<CellId> {
        if self.resolution(cell) == res {
            Ok(cell)
        } else {
            self.parent_cell(cell, res)
        }
    }

    /// Cells whose centers lie inside `poly`, plus any cell holding part of
    /// the polygon that is not already within one step of a covered cell.
    /// The second rule only triggers for slivers narrower than a cell; it
    /// probes points on the edges and on an interior lattice.
    /// A zero-area ring yields the empty set.
    pub fn cells_covering(&self, poly: &GeoPolygon, res: Resolution) -> Result<BTreeSet<CellId>> {
        if poly.is_degenerate() {
            return Ok(BTreeSet::new());
        }
        let mut cells = match self {
            Grid::Flat(g) => g.cells_with_center_in(poly, res)?,
        };
        let spacing_m = self.edge_m(res) / 8.0;
        for p in sliver_probes(poly, spacing_m) {
            let c = self.cell_of_point(p, res);
            if cells.contains(&c) {
                continue;
            }
            if !self.grid_disk(c, 1).iter().any(|n| cells.contains(n)) {
                cells.insert(c);
            }
        }
        Ok(cells)
    }

    fn edge_m(&self, res: Resolution) -> f64 {
        (self.cell_area_km2(res) * 1e6 / (1.5 * 3f64.sqrt())).sqrt()
    }
}

/// Points on the polygon's edges and on an interior lattice, in a fixed order.
fn sliver_probes(poly: &GeoPolygon, spacing_m: f64) -> Vec<LatLng> {
    const MAX_PER_AXIS: f64 = 2_000.0;
    let ring = poly.ring();
    let mut out = Vec::new();
    for (i, a) in ring.iter().enumerate() {
        let b = ring[(i + 1) % ring.len()];
        let n = (a.distance_m(&b) / spacing_m).ceil().clamp(1.0, 100_000.0) as usize;
        out.extend((0..n).map(|k| a.lerp(&b, k as f64 / n as f64)));
    }
    let (mut lat0, mut lat1, mut lon0, mut lon1) = (90.0f64, -90.0f64, 180.0f64, -180.0f64);
    for p in ring {
        lat0 = lat0.min(p.lat);
        lat1 = lat1.max(p.lat);
        lon0 = lon0.min(p.lon);
        lon1 = lon1.max(p.lon);
    }
    let sw = LatLng { lat: lat0, lon: lon0 };
    let rows = (sw.distance_m(&LatLng { lat: lat1, lon: lon0 }) / spacing_m)
        .ceil()
        .clamp(1.0, MAX_PER_AXIS) as usize;
    let cols = (sw.distance_m(&LatLng { lat: lat0, lon: lon1 }) / spacing_m)
        .ceil()
        .clamp(1.0, MAX_PER_AXIS) as usize;
    for i in 0..=rows {
        for j in 0..=cols {
            let p = LatLng {
                lat: lat0 + (lat1 - lat0) * i as f64 / rows as f64,
                lon: lon0 + (lon1 - lon0) * j as f64 / cols as f64,
            };
            if poly.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}
