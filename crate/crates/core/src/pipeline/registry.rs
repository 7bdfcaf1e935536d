//! Station registry, a TOML file with one `[[station]]` table per receiver.
//!
//! ```toml
//! [[station]]
//! id = "FI01"
//! lat = 43.77
//! lon = 11.25
//! elevation_deg = 40.0
//! melting_thickness_km = 0.5   # optional, engine default otherwise
//! default_isotherm_km = 3.0    # optional, used when no forecast applies
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rain_model::MIN_ELEVATION_DEG;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub elevation_deg: f64,
    #[serde(default)]
    pub melting_thickness_km: Option<f64>,
    #[serde(default)]
    pub default_isotherm_km: Option<f64>,
}

impl StationRecord {
    pub fn new(id: impl Into<String>, elevation_deg: f64) -> Self {
        Self {
            id: id.into(),
            lat: 0.0,
            lon: 0.0,
            elevation_deg,
            melting_thickness_km: None,
            default_isotherm_km: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() || self.id.contains([',', '"', '\n']) {
            return Err(Error::invalid("station id", format!("`{}` is not a usable id", self.id)));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=360.0).contains(&self.lon) {
            return Err(Error::invalid("station position", format!("station {}", self.id)));
        }
        if !(self.elevation_deg > MIN_ELEVATION_DEG && self.elevation_deg < 90.0) {
            return Err(Error::invalid(
                "elevation_deg",
                format!("station {}: {} outside (5, 90)", self.id, self.elevation_deg),
            ));
        }
        if let Some(d) = self.melting_thickness_km {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("melting_thickness_km", format!("station {}", self.id)));
            }
        }
        if let Some(h) = self.default_isotherm_km {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid("default_isotherm_km", format!("station {}", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    station: Vec<StationRecord>,
}

/// Parses and validates a registry. Station order is kept as written.
pub fn parse_registry(text: &str) -> Result<Vec<StationRecord>> {
    let file: RegistryFile = toml::from_str(text)?;
    validate_stations(&file.station)?;
    Ok(file.station)
}

pub fn load_registry(path: &Path) -> Result<Vec<StationRecord>> {
    parse_registry(&std::fs::read_to_string(path)?)
}

pub fn validate_stations(stations: &[StationRecord]) -> Result<()> {
    let mut ids = HashSet::new();
    for s in stations {
        s.validate()?;
        if !ids.insert(s.id.as_str()) {
            return Err(Error::invalid("station id", format!("`{}` appears twice", s.id)));
        }
    }
    Ok(())
}

pub fn registry_to_toml(stations: &[StationRecord]) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        station: &'a [StationRecord],
    }
    toml::to_string(&Out { station: stations }).expect("station records serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = r#"
[[station]]
id = "A"
lat = 43.7
lon = 11.2
elevation_deg = 40.0

[[station]]
id = "B"
lat = 43.8
lon = 11.3
elevation_deg = 38.5
melting_thickness_km = 0.4
default_isotherm_km = 2.8
"#;
        let st = parse_registry(text).unwrap();
        assert_eq!(st.len(), 2);
        assert_eq!(st[1].melting_thickness_km, Some(0.4));
        assert_eq!(parse_registry(&registry_to_toml(&st)).unwrap(), st);
    }

    #[test]
    fn rejects_bad_registries() {
        let dup = "[[station]]\nid='A'\nlat=0\nlon=0\nelevation_deg=40\n[[station]]\nid='A'\nlat=0\nlon=0\nelevation_deg=40\n";
        assert!(parse_registry(dup).is_err());
        let low = "[[station]]\nid='A'\nlat=0\nlon=0\nelevation_deg=4\n";
        assert!(parse_registry(low).is_err());
        let extra = "[[station]]\nid='A'\nlat=0\nlon=0\nelevation_deg=40\ncolour='red'\n";
        assert!(parse_registry(extra).is_err());
        assert!(parse_registry("").unwrap().is_empty());
    }
}
