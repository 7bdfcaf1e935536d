//! Freezing-level (0 °C isotherm) forecasts, CSV `valid_time,h0_km`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::time::{self, hours_between, Timestamp};
use crate::{Error, Result};

/// Plausible isotherm heights, km.
pub const H0_SANITY_BAND_KM: (f64, f64) = (0.5, 6.0);

pub const DEFAULT_MAX_AGE_H: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsothermForecast {
    entries: Vec<(Timestamp, f64)>,
}

impl IsothermForecast {
    pub fn new(entries: Vec<(Timestamp, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Parse(format!(
                    "forecast times must increase strictly ({} then {})",
                    time::format(w[0].0),
                    time::format(w[1].0)
                )));
            }
        }
        for &(t, h) in &entries {
            if !(H0_SANITY_BAND_KM.0..=H0_SANITY_BAND_KM.1).contains(&h) {
                return Err(Error::Parse(format!(
                    "isotherm height {h} km at {} is outside [{}, {}] km",
                    time::format(t),
                    H0_SANITY_BAND_KM.0,
                    H0_SANITY_BAND_KM.1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(Timestamp, f64)] {
        &self.entries
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            valid_time: String,
            h0_km: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            entries.push((time::parse(&row.valid_time)?, row.h0_km));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    /// Value of the latest entry at or before `t`.
    ///
    /// Fails with [`Error::NoForecast`] before the first entry and with
    /// [`Error::StaleForecast`] (which still carries the value) when that
    /// entry is more than `max_age_h` hours old.
    pub fn lookup_h0(&self, t: Timestamp, max_age_h: f64) -> Result<f64> {
        let idx = self.entries.partition_point(|&(vt, _)| vt <= t);
        if idx == 0 {
            return Err(Error::NoForecast(time::format(t)));
        }
        let (vt, h0) = self.entries[idx - 1];
        let age = hours_between(vt, t);
        if age > max_age_h {
            return Err(Error::StaleForecast {
                value_km: h0,
                age_hours: age,
                limit_hours: max_age_h,
            });
        }
        Ok(h0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc() -> IsothermForecast {
        IsothermForecast::parse_csv(
            "valid_time,h0_km\n2017-10-05T00:00:00Z,3.1\n2017-10-05T06:00:00Z,2.9\n2017-10-05T12:00:00Z,2.6\n",
        )
        .unwrap()
    }

    #[test]
    fn step_hold_lookup() {
        let f = fc();
        let t = |s| time::parse(s).unwrap();
        assert_eq!(f.lookup_h0(t("2017-10-05T06:00:00Z"), 12.0).unwrap(), 2.9);
        assert_eq!(f.lookup_h0(t("2017-10-05T11:59:00Z"), 12.0).unwrap(), 2.9);
        assert_eq!(f.lookup_h0(t("2017-10-05T23:00:00Z"), 12.0).unwrap(), 2.6);
        assert!(matches!(
            f.lookup_h0(t("2017-10-04T23:59:00Z"), 12.0),
            Err(Error::NoForecast(_))
        ));
        match f.lookup_h0(t("2017-10-06T01:00:00Z"), 12.0) {
            Err(Error::StaleForecast { value_km, age_hours, .. }) => {
                assert_eq!(value_km, 2.6);
                assert!((age_hours - 13.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_or_implausible() {
        assert!(IsothermForecast::parse_csv(
            "valid_time,h0_km\n2017-10-05T06:00:00Z,3\n2017-10-05T00:00:00Z,3\n"
        )
        .is_err());
        assert!(IsothermForecast::parse_csv(
            "valid_time,h0_km\n2017-10-05T06:00:00Z,3\n2017-10-05T06:00:00Z,3\n"
        )
        .is_err());
        assert!(IsothermForecast::parse_csv("valid_time,h0_km\n2017-10-05T06:00:00Z,9\n").is_err());
        assert!(IsothermForecast::parse_csv("valid_time,h0_km\nnot-a-time,3\n").is_err());
    }
}
