use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{DatasetOptions, GridTrajectory, RawTrajectory, TrajectorySet, LONG_GAP_SECS};
use crate::error::{Error, Result};
use crate::geo::{CellId, Grid, LatLng, Resolution};
use crate::time::Horizon;

#[derive(Debug, Clone)]
pub struct Interpolated {
    pub trajectory: GridTrajectory,
    /// Longest gap between consecutive in-horizon observations, seconds.
    pub max_gap: i64,
}

/// Resamples `raw` at every `step` seconds over `horizon` and maps each
/// position to a cell. Positions between observations are linear in
/// lat/lon; before the first and after the last observation the nearest
/// observed position is held.
pub fn interpolate_and_map(
    raw: &RawTrajectory,
    step: i64,
    grid: &Grid,
    res: Resolution,
    horizon: Horizon,
) -> Result<Interpolated> {
    let ticks = horizon.ticks(step)?;
    let pts: Vec<_> = raw.points.iter().filter(|p| horizon.contains(p.t)).copied().collect();
    if pts.is_empty() {
        return Err(Error::invalid(
            "trajectory",
            format!("user {} has no points inside the horizon", raw.uid),
        ));
    }
    let max_gap = pts.windows(2).map(|w| w[1].t - w[0].t).max().unwrap_or(0);

    let mut cells = Vec::with_capacity(ticks);
    let mut j = 0usize;
    let mut last: Option<(LatLng, CellId)> = None;
    for k in 0..ticks {
        let tau = horizon.start + k as i64 * step;
        while j + 1 < pts.len() && pts[j + 1].t <= tau {
            j += 1;
        }
        let pos = if tau <= pts[0].t {
            pts[0].pos()
        } else if j + 1 == pts.len() {
            pts[j].pos()
        } else {
            let (a, b) = (pts[j], pts[j + 1]);
            a.pos().lerp(&b.pos(), (tau - a.t) as f64 / (b.t - a.t) as f64)
        };
        let cell = match last {
            Some((p, c)) if p == pos => c,
            _ => grid.cell_of_point(pos, res),
        };
        last = Some((pos, cell));
        cells.push(cell);
    }
    Ok(Interpolated {
        trajectory: GridTrajectory {
            uid: raw.uid.clone(),
            start: horizon.start,
            step,
            cells,
        },
        max_gap,
    })
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    /// Users left out, with the reason.
    pub rejected: Vec<(String, String)>,
}

/// Interpolates every user (in parallel) and assembles the set.
pub fn build_trajectory_set(
    raws: &[RawTrajectory],
    horizon: Horizon,
    options: DatasetOptions,
) -> Result<(TrajectorySet, BuildReport)> {
    horizon.ticks(options.step)?;
    let results: Vec<_> = raws
        .par_iter()
        .map(|r| {
            (
                r.uid.clone(),
                interpolate_and_map(r, options.step, &options.grid, options.resolution, horizon),
            )
        })
        .collect();
    let mut report = BuildReport::default();
    let mut flagged = BTreeSet::new();
    let mut trajectories = Vec::with_capacity(results.len());
    for (uid, res) in results {
        match res {
            Ok(i) => {
                if options.max_gap_secs.is_some_and(|m| i.max_gap > m) {
                    report
                        .rejected
                        .push((uid, format!("observation gap of {} s", i.max_gap)));
                    continue;
                }
                if i.max_gap > LONG_GAP_SECS {
                    flagged.insert(uid);
                }
                trajectories.push(i.trajectory);
            }
            Err(e) => report.rejected.push((uid, e.to_string())),
        }
    }
    if trajectories.is_empty() {
        return Err(Error::invalid("trajectories", "no usable trajectories"));
    }
    Ok((TrajectorySet::new(trajectories, horizon, options, flagged)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::RawPoint;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::default()
    }

    fn raw(points: &[(i64, f64, f64)]) -> RawTrajectory {
        RawTrajectory::new(
            "u",
            points.iter().map(|&(t, lat, lon)| RawPoint { t, lat, lon }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn stationary_user_constant_cell() {
        let r = raw(&[(1000, 35.68, 139.76)]);
        let h = Horizon::new(0, 86_400).unwrap();
        let i = interpolate_and_map(&r, 300, &grid(), Resolution::DEFAULT, h).unwrap();
        let c = grid().cell_of(35.68, 139.76, Resolution::DEFAULT).unwrap();
        assert_eq!(i.trajectory.cells, vec![c; 288]);
    }

    #[test]
    fn midpoint_between_observations() {
        // Two observations 10 min apart sampled every 5 min: the middle tick is the midpoint.
        let g = grid();
        let (a, b) = ((35.60, 139.60), (35.70, 139.80));
        let r = raw(&[(0, a.0, a.1), (600, b.0, b.1)]);
        let h = Horizon::new(0, 900).unwrap();
        let i = interpolate_and_map(&r, 300, &g, Resolution::DEFAULT, h).unwrap();
        let mid = g.cell_of(35.65, 139.70, Resolution::DEFAULT).unwrap();
        assert_eq!(i.trajectory.cells[1], mid);
        assert_eq!(i.trajectory.cells[0], g.cell_of(a.0, a.1, Resolution::DEFAULT).unwrap());
        assert_eq!(i.trajectory.cells[2], g.cell_of(b.0, b.1, Resolution::DEFAULT).unwrap());
    }

    #[test]
    fn straight_move_visits_cells_in_order() {
        // Walk east across three neighbouring cells in 30 minutes; the sampled
        // sequence equals mapping brute-force positions every 5 minutes.
        let g = grid();
        let c0 = g.cell_of(35.68, 139.76, Resolution::DEFAULT).unwrap();
        let start = g.center(c0);
        let end = start.offset_m(0.0, 2.0 * 922.5);
        let r = RawTrajectory::new(
            "u",
            vec![
                RawPoint {
                    t: 0,
                    lat: start.lat,
                    lon: start.lon,
                },
                RawPoint {
                    t: 1800,
                    lat: end.lat,
                    lon: end.lon,
                },
            ],
        )
        .unwrap();
        let h = Horizon::new(0, 2100).unwrap();
        let i = interpolate_and_map(&r, 300, &g, Resolution::DEFAULT, h).unwrap();
        let brute: Vec<CellId> = (0..7)
            .map(|k| {
                let f = (f64::from(k) * 300.0 / 1800.0).min(1.0);
                g.cell_of_point(start.lerp(&end, f), Resolution::DEFAULT)
            })
            .collect();
        assert_eq!(i.trajectory.cells, brute);
        let mut distinct = brute.clone();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn empty_after_clipping_rejected() {
        let r = raw(&[(10_000, 35.0, 139.0)]);
        let h = Horizon::new(0, 900).unwrap();
        assert!(interpolate_and_map(&r, 300, &grid(), Resolution::DEFAULT, h).is_err());
    }

    #[test]
    fn long_gaps_are_flagged_or_dropped() {
        let a = raw(&[(0, 35.0, 139.0), (8 * 3600, 35.0, 139.0)]);
        let mut b = raw(&[(0, 35.0, 139.0)]);
        b.uid = "v".into();
        let h = Horizon::new(0, 86_400).unwrap();
        let (set, _) = build_trajectory_set(&[a.clone(), b.clone()], h, DatasetOptions::default()).unwrap();
        assert!(set.flagged().contains("u"));
        let opts = DatasetOptions {
            max_gap_secs: Some(6 * 3600),
            ..DatasetOptions::default()
        };
        let (set, rep) = build_trajectory_set(&[a, b], h, opts).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(rep.rejected[0].0, "u");
    }

    proptest! {
        #[test]
        fn horizon_total(n_ticks in 1usize..300, t0 in 0i64..50_000, t1 in 50_001i64..100_000) {
            let r = raw(&[(t0, 35.6, 139.6), (t1, 35.7, 139.8)]);
            let h = Horizon::new(0, n_ticks as i64 * 300).unwrap();
            if let Ok(i) = interpolate_and_map(&r, 300, &grid(), Resolution::DEFAULT, h) {
                prop_assert_eq!(i.trajectory.cells.len() as i64 * 300, h.len_secs());
            }
        }

        #[test]
        fn resampling_commutes_with_mapping(frac in 0.0f64..1.0) {
            // Subsampling the 5-minute sequence every 2nd tick agrees with
            // interpolating at 10 minutes, within one cell.
            let g = grid();
            let end_lat = 35.6 + 0.1 * frac;
            let r = raw(&[(0, 35.6, 139.6), (7200, end_lat, 139.75)]);
            let h = Horizon::new(0, 7200).unwrap();
            let fine = interpolate_and_map(&r, 300, &g, Resolution::DEFAULT, h).unwrap();
            let coarse = interpolate_and_map(&r, 600, &g, Resolution::DEFAULT, h).unwrap();
            for (k, c) in coarse.trajectory.cells.iter().enumerate() {
                let f = fine.trajectory.cells[2 * k];
                prop_assert!(f == *c || g.grid_disk(*c, 1).contains(&f));
            }
        }
    }
}
