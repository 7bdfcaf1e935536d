//! Predicted sun-transit windows, CSV `station_id,start,duration_s,depth_db`.
//!
//! A window masks every grid sample from the minute containing `start` to
//! the minute containing `start + duration_s`, both included.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::time::{self, minute_index, Timestamp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitWindow {
    pub station_id: String,
    pub start: Timestamp,
    pub duration_s: u32,
    /// Expected notch depth; informational for the engine, used by the
    /// simulator to draw the notch.
    pub depth_db: f64,
}

impl TransitWindow {
    pub fn first_k(&self) -> i64 {
        minute_index(self.start)
    }

    pub fn last_k(&self) -> i64 {
        minute_index(self.start + chrono::Duration::seconds(self.duration_s as i64))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitSchedule {
    by_station: BTreeMap<String, Vec<(i64, i64)>>,
    windows: Vec<TransitWindow>,
}

impl TransitSchedule {
    pub fn new(windows: Vec<TransitWindow>) -> Result<Self> {
        let mut by_station: BTreeMap<String, Vec<(i64, i64)>> = BTreeMap::new();
        for w in &windows {
            if !(w.depth_db.is_finite() && w.depth_db >= 0.0) {
                return Err(Error::Parse(format!(
                    "transit for {} has depth {}",
                    w.station_id, w.depth_db
                )));
            }
            by_station
                .entry(w.station_id.clone())
                .or_default()
                .push((w.first_k(), w.last_k()));
        }
        for (id, v) in by_station.iter_mut() {
            v.sort_unstable();
            if v.windows(2).any(|p| p[1].0 <= p[0].1) {
                return Err(Error::Parse(format!("overlapping transit windows for {id}")));
            }
        }
        Ok(Self { by_station, windows })
    }

    pub fn windows(&self) -> &[TransitWindow] {
        &self.windows
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            station_id: String,
            start: String,
            duration_s: u32,
            depth_db: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut windows = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            windows.push(TransitWindow {
                station_id: row.station_id,
                start: time::parse(&row.start)?,
                duration_s: row.duration_s,
                depth_db: row.depth_db,
            });
        }
        Self::new(windows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("station_id,start,duration_s,depth_db\n");
        for w in &self.windows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                w.station_id,
                time::format(w.start),
                w.duration_s,
                w.depth_db
            ));
        }
        s
    }

    pub fn is_masked(&self, station_id: &str, k: i64) -> bool {
        self.by_station.get(station_id).is_some_and(|v| {
            let i = v.partition_point(|&(first, _)| first <= k);
            i > 0 && k <= v[i - 1].1
        })
    }
}
