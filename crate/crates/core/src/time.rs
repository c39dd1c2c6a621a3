//! Time handling: UTC second timestamps, a half-open simulation horizon, and a
//! fixed-offset local clock for hour-of-day and calendar-day questions.

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECS_PER_HOUR: i64 = 3_600;
pub const SECS_PER_DAY: i64 = 86_400;

/// Half-open interval `[start, end)` in UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: i64,
    pub end: i64,
}

impl Horizon {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::invalid("horizon", "end must be after start"));
        }
        Ok(Self { start, end })
    }

    pub fn len_secs(&self) -> i64 {
        self.end - self.start
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }

    /// Number of ticks of `step` seconds; the horizon must be a whole multiple.
    pub fn ticks(&self, step: i64) -> Result<usize> {
        if step <= 0 {
            return Err(Error::invalid("step", "must be positive"));
        }
        if self.len_secs() % step != 0 {
            return Err(Error::invalid(
                "step",
                format!("horizon of {} s is not a multiple of {step} s", self.len_secs()),
            ));
        }
        Ok((self.len_secs() / step) as usize)
    }
}

/// Local wall clock at a fixed UTC offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalClock {
    pub utc_offset_secs: i32,
}

impl Default for LocalClock {
    /// UTC+9.
    fn default() -> Self {
        Self {
            utc_offset_secs: 9 * 3600,
        }
    }
}

impl LocalClock {
    pub fn utc() -> Self {
        Self { utc_offset_secs: 0 }
    }

    fn local(&self, t: i64) -> i64 {
        t + i64::from(self.utc_offset_secs)
    }

    /// Days since 1970-01-01 in local time.
    pub fn day(&self, t: i64) -> i64 {
        self.local(t).div_euclid(SECS_PER_DAY)
    }

    pub fn seconds_of_day(&self, t: i64) -> i64 {
        self.local(t).rem_euclid(SECS_PER_DAY)
    }

    pub fn hour(&self, t: i64) -> u32 {
        (self.seconds_of_day(t) / SECS_PER_HOUR) as u32
    }

    /// 0 = Monday ... 6 = Sunday.
    pub fn weekday(&self, t: i64) -> u32 {
        weekday_of_day(self.day(t))
    }

    /// Hour of the week, 0..168, Monday 00:00 local = 0.
    pub fn slot_of_week(&self, t: i64) -> usize {
        (self.weekday(t) * 24 + self.hour(t)) as usize
    }

    /// UTC timestamp of local midnight opening local day `day`.
    pub fn day_start(&self, day: i64) -> i64 {
        day * SECS_PER_DAY - i64::from(self.utc_offset_secs)
    }

    pub fn midnight_of(&self, date: NaiveDate) -> i64 {
        self.day_start(date_to_day(date))
    }

    pub fn date_of_day(&self, day: i64) -> NaiveDate {
        day_to_date(day)
    }
}

/// 1970-01-01 was a Thursday.
pub fn weekday_of_day(day: i64) -> u32 {
    (day + 3).rem_euclid(7) as u32
}

pub fn is_weekday(day: i64) -> bool {
    weekday_of_day(day) < 5
}

fn epoch_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

pub fn date_to_day(date: NaiveDate) -> i64 {
    (date - epoch_date()).num_days()
}

pub fn day_to_date(day: i64) -> NaiveDate {
    epoch_date() + chrono::Duration::days(day)
}

/// Parses an ISO-8601 timestamp. Inputs without an offset are taken as UTC.
pub fn parse_timestamp(s: &str) -> Result<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Utc.from_utc_datetime(&naive).timestamp());
        }
    }
    Err(Error::invalid("timestamp", format!("not an ISO-8601 timestamp: {s:?}")))
}

pub fn format_timestamp(t: i64) -> String {
    DateTime::<Utc>::from_timestamp(t, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| t.to_string())
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::invalid("date", format!("{s:?}: {e}")))
}
