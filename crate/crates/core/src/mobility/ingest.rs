use std::collections::BTreeMap;
use std::io::Read;

use super::{RawPoint, RawTrajectory};
use crate::error::{Error, Result};
use crate::geo::LatLng;
use crate::time::{parse_timestamp, Horizon};

/// How malformed rows are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Stop at the first bad row.
    #[default]
    FailFast,
    /// Skip bad rows and count them.
    Lenient,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub trajectories: Vec<RawTrajectory>,
    /// Malformed rows skipped in lenient mode, with line number and reason.
    pub skipped: Vec<(u64, String)>,
    pub outside_horizon: usize,
    pub duplicates: usize,
}

const HEADER: [&str; 4] = ["uid", "timestamp", "lat", "lon"];

/// Reads a `uid,timestamp,lat,lon` CSV. Rows outside `horizon` are dropped,
/// duplicate `(uid, timestamp)` rows keep the first occurrence, and each
/// user's points come back sorted by time. Users are returned in uid order.
pub fn ingest_trajectories<R: Read>(source: R, horizon: Option<Horizon>, mode: ParseMode) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `uid,timestamp,lat,lon`, got {headers:?}"),
        });
    }

    let mut report = IngestReport::default();
    let mut users: BTreeMap<String, BTreeMap<i64, RawPoint>> = BTreeMap::new();
    for record in reader.records() {
        let parsed = record
            .map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                (line, e.to_string())
            })
            .and_then(|rec| {
                let line = rec.position().map_or(0, |p| p.line());
                parse_row(&rec).map(|row| (line, row)).map_err(|m| (line, m))
            });
        let (_, (uid, point)) = match parsed {
            Ok(v) => v,
            Err((line, message)) => match mode {
                ParseMode::FailFast => return Err(Error::Parse { line, message }),
                ParseMode::Lenient => {
                    report.skipped.push((line, message));
                    continue;
                }
            },
        };
        if let Some(h) = horizon {
            if !h.contains(point.t) {
                report.outside_horizon += 1;
                continue;
            }
        }
        match users.entry(uid).or_default().entry(point.t) {
            std::collections::btree_map::Entry::Occupied(_) => report.duplicates += 1,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(point);
            }
        }
    }
    report.trajectories = users
        .into_iter()
        .map(|(uid, pts)| RawTrajectory {
            uid,
            points: pts.into_values().collect(),
        })
        .collect();
    Ok(report)
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<(String, RawPoint), String> {
    if rec.len() != 4 {
        return Err(format!("expected 4 fields, found {}", rec.len()));
    }
    let uid = rec[0].to_string();
    if uid.is_empty() {
        return Err("empty uid".into());
    }
    let t = parse_timestamp(&rec[1]).map_err(|e| e.to_string())?;
    let lat: f64 = rec[2].parse().map_err(|_| format!("bad latitude {:?}", &rec[2]))?;
    let lon: f64 = rec[3].parse().map_err(|_| format!("bad longitude {:?}", &rec[3]))?;
    LatLng::new(lat, lon).map_err(|e| e.to_string())?;
    Ok((uid, RawPoint { t, lat, lon }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_USERS: &str = "uid,timestamp,lat,lon
a,2012-07-02T00:00:00Z,35.68,139.76
b,2012-07-02T00:00:00Z,35.60,139.70
a,2012-07-02T00:10:00Z,35.69,139.77
b,2012-07-02T00:05:00Z,35.61,139.71
a,2012-07-02T00:05:00Z,35.685,139.765
b,2012-07-02T00:10:00Z,35.62,139.72
";

    #[test]
    fn two_users_three_points_sorted() {
        let r = ingest_trajectories(TWO_USERS.as_bytes(), None, ParseMode::FailFast).unwrap();
        assert_eq!(r.trajectories.len(), 2);
        for t in &r.trajectories {
            assert_eq!(t.points.len(), 3);
            assert!(t.points.windows(2).all(|w| w[0].t < w[1].t));
        }
        assert_eq!(r.trajectories[0].uid, "a");
        assert_eq!(r.trajectories[0].points[1].lat, 35.685);
    }

    #[test]
    fn bad_latitude_names_line() {
        let csv = "uid,timestamp,lat,lon\na,2012-07-02T00:00:00Z,35.0,139.0\na,2012-07-02T00:05:00Z,999,139.0\n";
        match ingest_trajectories(csv.as_bytes(), None, ParseMode::FailFast) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("999"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let lenient = ingest_trajectories(csv.as_bytes(), None, ParseMode::Lenient).unwrap();
        assert_eq!(lenient.skipped.len(), 1);
        assert_eq!(lenient.skipped[0].0, 3);
        assert_eq!(lenient.trajectories[0].points.len(), 1);
    }

    #[test]
    fn duplicates_keep_first_and_horizon_clips() {
        let csv = "uid,timestamp,lat,lon
a,2012-07-02T00:00:00Z,35.0,139.0
a,2012-07-02T00:00:00Z,36.0,140.0
a,2012-07-03T00:00:00Z,35.0,139.0
";
        let start = parse_timestamp("2012-07-02T00:00:00Z").unwrap();
        let h = Horizon::new(start, start + 3600).unwrap();
        let r = ingest_trajectories(csv.as_bytes(), Some(h), ParseMode::FailFast).unwrap();
        assert_eq!(r.duplicates, 1);
        assert_eq!(r.outside_horizon, 1);
        assert_eq!(
            r.trajectories[0].points,
            vec![RawPoint {
                t: start,
                lat: 35.0,
                lon: 139.0
            }]
        );
    }

    #[test]
    fn wrong_header_rejected() {
        let csv = "user,time,lat,lon\n";
        assert!(matches!(
            ingest_trajectories(csv.as_bytes(), None, ParseMode::Lenient),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
