//! Telemetry ingestion: newline-delimited JSON records
//! `{"station_id": "...", "timestamp": "<RFC 3339>", "esn0_db": 10.4}`.
//!
//! Records are snapped to the one-minute grid. Per station, indices must
//! increase strictly; anything else is rejected and counted, never fatal.
//! Gaps are kept as gaps.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::time::{self, minute_index, Timestamp};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub station_id: String,
    pub timestamp: String,
    pub esn0_db: f64,
}

/// One accepted measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSample {
    pub k: i64,
    pub esn0_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    Malformed,
    UnknownStation,
    OutOfOrder,
    Duplicate,
}

/// Counters for rejected records and per-sample problems, plus the first
/// few messages for humans.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub malformed: u64,
    pub unknown_station: u64,
    pub out_of_order: u64,
    pub duplicate: u64,
    pub stale_forecast: u64,
    pub missing_forecast: u64,
    pub invalid_rate: u64,
    pub global_fades: u64,
    pub messages: Vec<String>,
}

const MAX_MESSAGES: usize = 20;

impl Diagnostics {
    pub fn note(&mut self, msg: impl FnOnce() -> String) {
        if self.messages.len() < MAX_MESSAGES {
            self.messages.push(msg());
        }
    }

    pub fn reject(&mut self, r: Rejection, msg: impl FnOnce() -> String) {
        match r {
            Rejection::Malformed => self.malformed += 1,
            Rejection::UnknownStation => self.unknown_station += 1,
            Rejection::OutOfOrder => self.out_of_order += 1,
            Rejection::Duplicate => self.duplicate += 1,
        }
        self.note(msg);
    }

    pub fn rejected(&self) -> u64 {
        self.malformed + self.unknown_station + self.out_of_order + self.duplicate
    }

    pub fn rejections(&self) -> String {
        format!(
            "rejected {} (malformed {}, unknown station {}, out of order {}, duplicate {})",
            self.rejected(),
            self.malformed,
            self.unknown_station,
            self.out_of_order,
            self.duplicate
        )
    }

    /// Counters of records that were processed with reduced quality.
    pub fn quality(&self) -> String {
        format!(
            "stale forecast {}, missing forecast {}, invalid rates {}, global fades {}",
            self.stale_forecast, self.missing_forecast, self.invalid_rate, self.global_fades
        )
    }

    pub fn summary(&self) -> String {
        format!("{}; {}", self.rejections(), self.quality())
    }
}

pub fn parse_record(line: &str) -> std::result::Result<(String, Timestamp, f64), String> {
    let r: TelemetryRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let t = time::parse(&r.timestamp).map_err(|e| e.to_string())?;
    if !r.esn0_db.is_finite() {
        return Err("esn0_db is not finite".into());
    }
    Ok((r.station_id, t, r.esn0_db))
}

/// Stateful per-station order check shared by batch and streaming ingestion.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderGuard {
    last_k: HashMap<String, i64>,
}

impl OrderGuard {
    pub fn check(&mut self, station: &str, k: i64) -> std::result::Result<(), Rejection> {
        match self.last_k.get(station) {
            Some(&last) if k == last => Err(Rejection::Duplicate),
            Some(&last) if k < last => Err(Rejection::OutOfOrder),
            _ => {
                self.last_k.insert(station.to_string(), k);
                Ok(())
            }
        }
    }
}

/// Result of reading a whole telemetry file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    /// Accepted samples per station id, in time order.
    pub stations: BTreeMap<String, Vec<SnrSample>>,
    pub diagnostics: Diagnostics,
}

/// Reads telemetry, keeping only stations for which `known` returns true.
pub fn ingest<R: BufRead>(reader: R, known: impl Fn(&str) -> bool) -> Result<Ingested> {
    let mut out = Ingested::default();
    let mut guard = OrderGuard::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (station, t, esn0) = match parse_record(&line) {
            Ok(r) => r,
            Err(e) => {
                out.diagnostics
                    .reject(Rejection::Malformed, || format!("line {lineno}: {e}"));
                continue;
            }
        };
        if !known(&station) {
            out.diagnostics.reject(Rejection::UnknownStation, || {
                format!("line {lineno}: unknown station `{station}`")
            });
            continue;
        }
        let k = minute_index(t);
        if let Err(r) = guard.check(&station, k) {
            out.diagnostics.reject(r, || {
                format!("line {lineno}: {r:?} record for {station} at {}", time::format(t))
            });
            continue;
        }
        out.stations
            .entry(station)
            .or_default()
            .push(SnrSample { k, esn0_db: esn0 });
    }
    Ok(out)
}

/// Formats one telemetry line with the 0.1 dB resolution of the receivers.
pub fn format_record(station_id: &str, t: Timestamp, esn0_db: f64) -> String {
    format!(
        "{{\"station_id\":{},\"timestamp\":\"{}\",\"esn0_db\":{:.1}}}",
        serde_json::to_string(station_id).expect("string serializes"),
        time::format(t),
        esn0_db
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Ingested {
        ingest(text.as_bytes(), |s| ["A", "B", "C"].contains(&s)).unwrap()
    }

    #[test]
    fn empty_input() {
        let r = run("");
        assert!(r.stations.is_empty());
        assert_eq!(r.diagnostics, Diagnostics::default());
    }

    #[test]
    fn interleaved_stations_are_separated() {
        let mut text = String::new();
        for m in 0..5 {
            for s in ["C", "A", "B"] {
                let t = time::from_minute_index(1000 + m);
                text.push_str(&format_record(s, t, 10.0 + m as f64 / 10.0));
                text.push('\n');
            }
        }
        let r = run(&text);
        assert_eq!(r.stations.len(), 3);
        for v in r.stations.values() {
            let ks: Vec<i64> = v.iter().map(|s| s.k).collect();
            assert_eq!(ks, (1000..1005).collect::<Vec<_>>());
        }
        assert_eq!(r.diagnostics.rejected(), 0);
    }

    #[test]
    fn rejections_are_counted() {
        let text = "\
{\"station_id\":\"A\",\"timestamp\":\"2017-10-05T10:00:00Z\",\"esn0_db\":10.4}
{\"station_id\":\"A\",\"timestamp\":\"2017-10-05T10:00:00Z\",\"esn0_db\":10.5}
{\"station_id\":\"A\",\"timestamp\":\"2017-10-05T10:02:00Z\",\"esn0_db\":10.4}
{\"station_id\":\"A\",\"timestamp\":\"2017-10-05T10:01:00Z\",\"esn0_db\":10.4}
{\"station_id\":\"Z\",\"timestamp\":\"2017-10-05T10:03:00Z\",\"esn0_db\":10.4}
{\"station_id\":\"A\",\"timestamp\":\"2017-10-05T10:03:00Z\"
garbage

{\"station_id\":\"A\",\"timestamp\":\"2017-10-05T10:05:00Z\",\"esn0_db\":10.3}
";
        let r = run(text);
        let d = &r.diagnostics;
        assert_eq!((d.duplicate, d.out_of_order, d.unknown_station, d.malformed), (1, 1, 1, 2));
        let a = &r.stations["A"];
        assert_eq!(a.len(), 3);
        assert_eq!(a[2].k - a[1].k, 3, "gap kept");
    }

    #[test]
    fn record_format_round_trips() {
        let t = time::parse("2017-10-05T10:00:00Z").unwrap();
        let line = format_record("A", t, 10.449_999);
        assert_eq!(line, r#"{"station_id":"A","timestamp":"2017-10-05T10:00:00Z","esn0_db":10.4}"#);
        assert_eq!(parse_record(&line).unwrap(), ("A".into(), t, 10.4));
    }
}
