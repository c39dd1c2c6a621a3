//! Views over finished ensembles: cumulative curves, severity clusters,
//! hourly histograms and policy comparisons. Everything here reads kept runs
//! only, so maps and curves describe the same runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{percentile, EnsembleResult};
use crate::error::{Error, Result};
use crate::geo::{CellId, Resolution};
use crate::policy::{PolicyKind, PolicySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub day: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub name: String,
    pub points: Vec<CurvePoint>,
    /// Short parameter and policy summaries shown next to the curve.
    pub clips: Vec<String>,
}

impl CurveSeries {
    pub fn final_mean(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.mean)
    }
}

/// Per-day mean cumulative infections over kept runs with the empirical
/// 2.5/97.5 percentile band. The band is widened to include the mean where
/// a skewed day would otherwise leave the mean outside it.
pub fn cumulative_curve(er: &EnsembleResult, name: &str, policies: &[PolicySpec]) -> Result<CurveSeries> {
    if er.kept.is_empty() {
        return Err(Error::invalid("kept", "result has no kept runs"));
    }
    let days = er.runs[er.kept[0]].daily.len();
    let mut points = Vec::with_capacity(days);
    for d in 0..days {
        let mut v: Vec<f64> = er.kept_runs().map(|r| r.daily[d].cum_infections as f64).collect();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        points.push(CurvePoint {
            day: d,
            mean,
            lo: percentile(&v, 2.5).min(mean),
            hi: percentile(&v, 97.5).max(mean),
        });
    }
    let p = &er.params;
    let mut clips = vec![
        format!("beta_global={}", p.beta_global),
        format!("sigma={}", p.sigma),
        format!("gamma={}", p.gamma),
        format!("i0={}", p.i0),
        format!("runs={}/{}", er.kept.len(), er.runs.len()),
    ];
    clips.extend(policies.iter().map(policy_clip));
    Ok(CurveSeries {
        name: name.to_string(),
        points,
        clips,
    })
}

fn policy_clip(p: &PolicySpec) -> String {
    let what = match &p.kind {
        PolicyKind::Lockdown { polygons } => format!("{} region(s)", polygons.len()),
        PolicyKind::Telecommuting { regions } => {
            let rates: Vec<String> = regions.iter().map(|r| format!("{}", r.reduction)).collect();
            format!("reduction {}", rates.join("/"))
        }
        PolicyKind::Screening { cells, detect_prob } => format!("{} cell(s) at p={detect_prob}", cells.len()),
    };
    format!(
        "{} {}: {} from {} for {} days",
        p.kind_name(),
        p.name,
        what,
        p.start,
        p.days
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Green,
    Orange,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityCluster {
    pub cell: CellId,
    pub count: u64,
    /// Closed `[lon, lat]` ring.
    pub polygon: Vec<[f64; 2]>,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityPayload {
    pub resolution: Resolution,
    /// Counts are event totals over all kept runs; divide by `kept_runs` for per-run means.
    pub totals_over_kept_runs: bool,
    pub kept_runs: usize,
    pub total_events: u64,
    pub clusters: Vec<SeverityCluster>,
}

/// Infection events of kept runs aggregated to `res`.
pub fn severity_clusters(er: &EnsembleResult, res: Resolution) -> Result<SeverityPayload> {
    let grid = er.meta.grid;
    if res > er.meta.resolution {
        return Err(Error::invalid(
            "res",
            format!(
                "resolution {} is finer than the simulation's {}",
                res.level(),
                er.meta.resolution.level()
            ),
        ));
    }
    let mut counts: BTreeMap<CellId, u64> = BTreeMap::new();
    for run in er.kept_runs() {
        for e in &run.events {
            *counts.entry(grid.aggregate(e.cell, res)?).or_default() += 1;
        }
    }
    let mut sorted: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let (q1, q2) = if sorted.is_empty() {
        (0.0, 0.0)
    } else {
        (percentile(&sorted, 100.0 / 3.0), percentile(&sorted, 200.0 / 3.0))
    };
    let clusters = counts
        .into_iter()
        .map(|(cell, count)| SeverityCluster {
            cell,
            count,
            polygon: grid.boundary_geojson(cell),
            severity: match count as f64 {
                c if c <= q1 => Severity::Green,
                c if c <= q2 => Severity::Orange,
                _ => Severity::Red,
            },
        })
        .collect::<Vec<_>>();
    Ok(SeverityPayload {
        resolution: res,
        totals_over_kept_runs: true,
        kept_runs: er.kept.len(),
        total_events: clusters.iter().map(|c| c.count).sum(),
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyHistogram {
    /// Percent of the region's events per local hour of day.
    pub bins: [f64; 24],
    pub total_events: u64,
    pub no_data: bool,
}

/// Local-hour distribution of kept-run events inside `region`. Region cells
/// may be at any resolution up to the simulation's; an event belongs to a
/// region cell when it aggregates to it.
pub fn hourly_histogram(er: &EnsembleResult, region: &[CellId]) -> Result<HourlyHistogram> {
    if region.is_empty() {
        return Err(Error::invalid("region", "region has no cells"));
    }
    let grid = er.meta.grid;
    let mut by_res: BTreeMap<Resolution, Vec<CellId>> = BTreeMap::new();
    for &c in region {
        if !grid.is_valid(c) {
            return Err(Error::invalid("region", format!("{c} is not a cell of this grid")));
        }
        let r = grid.resolution(c);
        if r > er.meta.resolution {
            return Err(Error::invalid(
                "region",
                format!("{c} is finer than the simulation grid"),
            ));
        }
        by_res.entry(r).or_default().push(c);
    }
    let mut counts = [0u64; 24];
    for run in er.kept_runs() {
        for e in &run.events {
            let inside = by_res
                .iter()
                .any(|(r, cells)| grid.aggregate(e.cell, *r).is_ok_and(|a| cells.contains(&a)));
            if inside {
                counts[er.meta.clock.hour(e.t) as usize] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let bins = if total == 0 {
        [0.0; 24]
    } else {
        counts.map(|c| 100.0 * c as f64 / total as f64)
    };
    Ok(HourlyHistogram {
        bins,
        total_events: total,
        no_data: total == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub curve: String,
    pub final_mean: f64,
    /// 1 is the fewest infections; equal means share a rank.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub curves: Vec<CurveSeries>,
    pub ranking: Vec<RankEntry>,
}

/// Curves of comparable results plus a ranking by final-day mean.
pub fn compare_policies(curves: Vec<(CurveSeries, &EnsembleResult)>, name: &str) -> Result<Comparison> {
    if curves.len() < 2 {
        return Err(Error::invalid("results", "a comparison needs at least two results"));
    }
    let first = curves[0].1.meta;
    for (c, er) in &curves[1..] {
        if er.meta.horizon != first.horizon {
            return Err(Error::invalid(
                "horizon",
                format!(
                    "{} covers {}..{}, expected {}..{}",
                    c.name, er.meta.horizon.start, er.meta.horizon.end, first.horizon.start, first.horizon.end
                ),
            ));
        }
        if er.meta.population != first.population {
            return Err(Error::invalid(
                "population",
                format!(
                    "{} has {} users, expected {}",
                    c.name, er.meta.population, first.population
                ),
            ));
        }
    }
    let curves: Vec<CurveSeries> = curves.into_iter().map(|(c, _)| c).collect();
    let mut order: Vec<(String, f64)> = curves.iter().map(|c| (c.name.clone(), c.final_mean())).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut ranking: Vec<RankEntry> = Vec::with_capacity(order.len());
    for (i, (curve, final_mean)) in order.into_iter().enumerate() {
        let rank = match ranking.last() {
            Some(prev) if prev.final_mean == final_mean => prev.rank,
            _ => i + 1,
        };
        ranking.push(RankEntry {
            curve,
            final_mean,
            rank,
        });
    }
    Ok(Comparison {
        name: name.to_string(),
        curves,
        ranking,
    })
}
