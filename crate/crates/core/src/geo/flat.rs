//! Dependency-free hexagon tessellation on an equirectangular plane.
//!
//! Points are projected with `x = R·λ·cos φ₀`, `y = R·φ` around a reference
//! latitude φ₀ and binned into pointy-top hexagons in axial coordinates. Cell
//! area is 0.737 km² at level 8 near φ₀ and scales by 7 per level, like H3.
//! Levels are not nested: a parent is the coarser cell holding the child's
//! center, so only single-hop parents are defined. Points exactly on an edge
//! go to whichever cell cube rounding picks.
//!
//! Id layout: `0xF` tag in bits 60..64, level in 56..60, axial `q` and `r`
//! as 28-bit two's complement in 28..56 and 0..28.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{point_in_ring, CellId, GeoPolygon, LatLng, Resolution, EARTH_RADIUS_M};
use crate::error::{Error, Result};

const TAG: u64 = 0xF;
const COORD_BITS: u32 = 28;
const COORD_MASK: u64 = (1 << COORD_BITS) - 1;
const LEVEL8_AREA_M2: f64 = 737_000.0;
const MAX_COVER_CANDIDATES: i64 = 20_000_000;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatHexGrid {
    /// Latitude (degrees) where projected areas are true.
    pub ref_lat: f64,
}

impl Default for FlatHexGrid {
    fn default() -> Self {
        Self { ref_lat: 35.68 }
    }
}

impl FlatHexGrid {
    /// Hexagon circumradius (= edge length) in meters.
    pub fn edge_m(res: Resolution) -> f64 {
        let s8 = (LEVEL8_AREA_M2 / (1.5 * SQRT3)).sqrt();
        s8 * 7f64.sqrt().powi(8 - i32::from(res.level()))
    }

    pub fn cell_area_km2(&self, res: Resolution) -> f64 {
        let s = Self::edge_m(res);
        1.5 * SQRT3 * s * s / 1e6
    }

    fn cos_ref(&self) -> f64 {
        self.ref_lat.to_radians().cos()
    }

    fn project(&self, p: LatLng) -> (f64, f64) {
        (
            EARTH_RADIUS_M * p.lon.to_radians() * self.cos_ref(),
            EARTH_RADIUS_M * p.lat.to_radians(),
        )
    }

    fn unproject(&self, x: f64, y: f64) -> LatLng {
        LatLng {
            lat: (y / EARTH_RADIUS_M).to_degrees(),
            lon: (x / (EARTH_RADIUS_M * self.cos_ref())).to_degrees(),
        }
    }

    fn axial_of(x: f64, y: f64, s: f64) -> (i64, i64) {
        let qf = (SQRT3 / 3.0 * x - y / 3.0) / s;
        let rf = (2.0 / 3.0 * y) / s;
        cube_round(qf, rf)
    }

    fn center_xy(q: i64, r: i64, s: f64) -> (f64, f64) {
        (s * (SQRT3 * q as f64 + SQRT3 / 2.0 * r as f64), s * 1.5 * r as f64)
    }

    pub(crate) fn cell_of(&self, p: LatLng, res: Resolution) -> CellId {
        let (x, y) = self.project(p);
        let (q, r) = Self::axial_of(x, y, Self::edge_m(res));
        encode(res, q, r)
    }

    pub(crate) fn resolution(cell: CellId) -> Resolution {
        Resolution::new(((cell.raw() >> 56) & 0xF) as u8).expect("4-bit level")
    }

    pub(crate) fn is_valid(cell: CellId) -> bool {
        cell.raw() >> 60 == TAG
    }

    pub(crate) fn center(&self, cell: CellId) -> LatLng {
        let (res, q, r) = decode(cell);
        let (x, y) = Self::center_xy(q, r, Self::edge_m(res));
        self.unproject(x, y)
    }

    pub(crate) fn boundary(&self, cell: CellId) -> Vec<LatLng> {
        let (res, q, r) = decode(cell);
        let s = Self::edge_m(res);
        let (cx, cy) = Self::center_xy(q, r, s);
        let mut ring: Vec<LatLng> = (0..6)
            .map(|i| {
                let ang = (60.0 * f64::from(i) - 30.0_f64).to_radians();
                self.unproject(cx + s * ang.cos(), cy + s * ang.sin())
            })
            .collect();
        ring.push(ring[0]);
        ring
    }

    pub(crate) fn grid_disk(&self, cell: CellId, k: u32) -> Vec<CellId> {
        let (res, q, r) = decode(cell);
        let k = i64::from(k);
        let mut out = Vec::new();
        for dq in -k..=k {
            for dr in (-k).max(-dq - k)..=k.min(-dq + k) {
                out.push(encode(res, q + dq, r + dr));
            }
        }
        out
    }

    pub(crate) fn parent(&self, cell: CellId, coarser: Resolution) -> CellId {
        self.cell_of(self.center(cell), coarser)
    }

    pub(crate) fn cells_with_center_in(&self, poly: &GeoPolygon, res: Resolution) -> Result<BTreeSet<CellId>> {
        let s = Self::edge_m(res);
        let pts: Vec<(f64, f64)> = poly.ring().iter().map(|p| self.project(*p)).collect();
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let r_lo = (ymin / (1.5 * s)).floor() as i64 - 1;
        let r_hi = (ymax / (1.5 * s)).ceil() as i64 + 1;
        let width = SQRT3 * s;
        let q_span = ((xmax - xmin) / width).ceil() as i64 + 3;
        if (r_hi - r_lo + 1).saturating_mul(q_span) > MAX_COVER_CANDIDATES {
            return Err(Error::invalid(
                "polygon",
                "polygon too large to cover at this resolution",
            ));
        }
        let mut cells = BTreeSet::new();
        for r in r_lo..=r_hi {
            // x = width·(q + r/2)  ⇒  q = x/width − r/2
            let q_lo = (xmin / width - r as f64 / 2.0).floor() as i64 - 1;
            let q_hi = (xmax / width - r as f64 / 2.0).ceil() as i64 + 1;
            for q in q_lo..=q_hi {
                let c = Self::center_xy(q, r, s);
                if point_in_ring(&pts, c) {
                    cells.insert(encode(res, q, r));
                }
            }
        }
        Ok(cells)
    }
}

fn cube_round(qf: f64, rf: f64) -> (i64, i64) {
    let sf = -qf - rf;
    let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i64, r as i64)
}

fn encode(res: Resolution, q: i64, r: i64) -> CellId {
    CellId::from_raw(
        (TAG << 60)
            | (u64::from(res.level()) << 56)
            | (((q as u64) & COORD_MASK) << COORD_BITS)
            | ((r as u64) & COORD_MASK),
    )
}

fn sign_extend(v: u64) -> i64 {
    let shift = 64 - COORD_BITS;
    ((v << shift) as i64) >> shift
}

fn decode(cell: CellId) -> (Resolution, i64, i64) {
    let raw = cell.raw();
    (
        FlatHexGrid::resolution(cell),
        sign_extend((raw >> COORD_BITS) & COORD_MASK),
        sign_extend(raw & COORD_MASK),
    )
}
