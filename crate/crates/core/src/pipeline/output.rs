//! Engine outputs and their text forms.
//!
//! Numbers are written with fixed precision so files are byte-stable:
//! three decimals for dB values, four significant digits for rain rates
//! and amounts.

use serde::{Deserialize, Serialize};

use crate::time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Ok,
    /// Estimated with a stale or fallback isotherm height.
    Degraded,
    /// Inside a predicted sun transit; no detection, no rate.
    Masked,
    /// Raining but the rate could not be computed.
    Invalid,
    /// Inside a global fade hold; no event may start.
    Global,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Ok => "ok",
            Quality::Degraded => "degraded",
            Quality::Masked => "masked",
            Quality::Invalid => "invalid",
            Quality::Global => "global",
        }
    }
}

/// One per accepted input sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub station_id: String,
    pub k: i64,
    pub epsilon_db: f64,
    pub rain_flag: bool,
    pub l_rain_db: Option<f64>,
    pub rate_mm_per_h: Option<f64>,
    pub quality: Quality,
}

/// Summary of one closed rain event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub station_id: String,
    pub onset_k: i64,
    pub end_k: i64,
    pub dry_ref_db: f64,
    pub h0_km: Option<f64>,
    pub peak_rate_mm_per_h: f64,
    pub cumulative_mm: f64,
    pub rate_samples: u32,
    pub invalid_samples: u32,
    pub quality: Quality,
}

/// `x` rounded to four significant digits, without exponent.
pub fn fmt_sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { "null".into() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may have carried into a new digit (9.9996 -> 10.000)
    let rounded: f64 = s.parse().unwrap_or(x);
    let mag2 = rounded.abs().log10().floor() as i32;
    if mag2 != mag {
        let decimals = (3 - mag2).max(0) as usize;
        return format!("{rounded:.decimals$}");
    }
    s
}

pub fn fmt_db(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map(f).unwrap_or_else(|| "null".into())
}

impl OutputRecord {
    pub fn to_json_line(&self) -> String {
        format!(
            "{{\"station_id\":{},\"timestamp\":\"{}\",\"epsilon_db\":{},\"rain_flag\":{},\"l_rain_db\":{},\"rate_mm_per_h\":{},\"quality_flag\":\"{}\"}}",
            serde_json::to_string(&self.station_id).expect("string serializes"),
            time::format(time::from_minute_index(self.k)),
            fmt_db(self.epsilon_db),
            self.rain_flag,
            opt(self.l_rain_db, fmt_db),
            opt(self.rate_mm_per_h, fmt_sig4),
            self.quality.as_str()
        )
    }
}

/// Parsed form of an estimate line, as read back by `compare`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EstimateLine {
    pub station_id: String,
    pub timestamp: String,
    pub epsilon_db: f64,
    pub rain_flag: bool,
    pub l_rain_db: Option<f64>,
    pub rate_mm_per_h: Option<f64>,
    pub quality_flag: Quality,
}

pub const EVENTS_CSV_HEADER: &str = "station_id,start,end,duration_min,dry_ref_db,h0_km,peak_rate_mm_per_h,cumulative_mm,rate_samples,invalid_samples,quality_flag";

impl EventRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.station_id,
            time::format(time::from_minute_index(self.onset_k)),
            time::format(time::from_minute_index(self.end_k)),
            self.end_k - self.onset_k,
            fmt_db(self.dry_ref_db),
            self.h0_km.map(|h| format!("{h:.3}")).unwrap_or_default(),
            fmt_sig4(self.peak_rate_mm_per_h),
            fmt_sig4(self.cumulative_mm),
            self.rate_samples,
            self.invalid_samples,
            self.quality.as_str()
        )
    }
}

/// Sorts into the canonical output order: station id, then time.
pub fn sort_records(records: &mut [OutputRecord]) {
    records.sort_by(|a, b| a.station_id.cmp(&b.station_id).then(a.k.cmp(&b.k)));
}

pub fn sort_events(events: &mut [EventRecord]) {
    events.sort_by(|a, b| a.station_id.cmp(&b.station_id).then(a.onset_k.cmp(&b.onset_k)));
}
