//! Timestamps and the fixed one-minute sampling grid.

use chrono::{DateTime, SecondsFormat, Utc};

use crate::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Sampling period of the telemetry grid, in seconds.
pub const SAMPLE_PERIOD_S: i64 = 60;

/// Index of the one-minute slot containing `t` (minutes since the Unix epoch).
pub fn minute_index(t: Timestamp) -> i64 {
    t.timestamp().div_euclid(SAMPLE_PERIOD_S)
}

pub fn from_minute_index(k: i64) -> Timestamp {
    DateTime::from_timestamp(k * SAMPLE_PERIOD_S, 0).expect("minute index within chrono range")
}

pub fn from_unix_seconds(s: i64) -> Result<Timestamp> {
    DateTime::from_timestamp(s, 0)
        .ok_or_else(|| Error::Parse(format!("timestamp {s} out of range")))
}

pub fn parse(s: &str) -> Result<Timestamp> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Parse(format!("bad timestamp `{}`: {e}", s.trim())))
}

pub fn format(t: Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn hours_between(earlier: Timestamp, later: Timestamp) -> f64 {
    (later - earlier).num_milliseconds() as f64 / 3_600_000.0
}
