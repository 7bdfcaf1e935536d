//! Engine configuration in a flat `key = value` text format.
//!
//! `#` starts a comment, blank lines are ignored and keys may appear in any
//! order. Unknown keys and repeated keys are errors. Every key is optional;
//! missing keys keep the defaults returned by [`EngineConfig::default`].
//! Keys ending in `_db` are in decibels and are converted to linear factors
//! where the engine needs them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::link_budget::{compute_xi, CarrierParams, LinkNoiseParams, SPEED_OF_LIGHT};
use crate::pipeline::fade::GlobalFadePolicy;
use crate::rain_model::PowerLawCoeffs;
use crate::synth::DrySignalModel;
use crate::trackers::TrackerConfig;
use crate::units::{db_to_linear, linear_to_db};
use crate::{Error, Result};

/// Environment variable that overrides the `--config` path of the CLI.
pub const CONFIG_ENV_VAR: &str = "SATRAIN_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub link: LinkNoiseParams,
    pub carrier: CarrierParams,
    pub ll_coeffs: PowerLawCoeffs,
    pub ml_coeffs: PowerLawCoeffs,
    /// Melting-layer thickness used for stations that do not set their own, km.
    pub melting_thickness_km: f64,
    pub slow: TrackerConfig,
    pub fast: TrackerConfig,
    pub detector: DetectorConfig,
    pub sun_transit_masking: bool,
    pub fade: GlobalFadePolicy,
    /// Forecasts older than this mark rate estimates as degraded, hours.
    pub forecast_max_age_h: f64,
    pub dry_model: DrySignalModel,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            link: LinkNoiseParams::reference(),
            carrier: CarrierParams::reference(),
            ll_coeffs: PowerLawCoeffs::LIQUID_KU,
            ml_coeffs: PowerLawCoeffs::MELTING_KU,
            melting_thickness_km: 0.5,
            slow: TrackerConfig::slow_default(),
            fast: TrackerConfig::fast_default(),
            detector: DetectorConfig::default(),
            sun_transit_masking: true,
            fade: GlobalFadePolicy::default(),
            forecast_max_age_h: 12.0,
            dry_model: DrySignalModel::default(),
        }
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Config {
        line,
        message: format!("`{key}`: `{v}` is not a number"),
    })?;
    if !x.is_finite() {
        return Err(Error::Config {
            line,
            message: format!("`{key}` must be finite"),
        });
    }
    Ok(x)
}

fn parse_u32(line: usize, key: &str, v: &str) -> Result<u32> {
    v.parse().map_err(|_| Error::Config {
        line,
        message: format!("`{key}`: `{v}` is not a non-negative integer"),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config {
            line,
            message: format!("`{key}`: expected true or false, got `{v}`"),
        }),
    }
}

impl EngineConfig {
    pub fn xi(&self) -> Result<f64> {
        compute_xi(&self.link)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    message: format!("`{key}` given twice"),
                });
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let f = |v: &str| parse_f64(line, key, v);
        match key {
            "atm_loss_db" => self.link.atm_loss = db_to_linear(f(v)?),
            "cloud_loss_db" => self.link.cloud_loss = db_to_linear(f(v)?),
            "t_cosmos" => self.link.t_cosmos = f(v)?,
            "t_meteo" => self.link.t_meteo = f(v)?,
            "t_ground" => self.link.t_ground = f(v)?,
            "t_receiver" => self.link.t_receiver = f(v)?,
            "flux_density" => self.carrier.flux_density = f(v)?,
            "rx_gain_db" => self.carrier.rx_gain = db_to_linear(f(v)?),
            "frequency_ghz" => self.carrier.wavelength = SPEED_OF_LIGHT / (f(v)? * 1e9),
            "symbol_rate" => self.carrier.symbol_rate = f(v)?,
            "alpha_ll" => self.ll_coeffs.alpha = f(v)?,
            "beta_ll" => self.ll_coeffs.beta = f(v)?,
            "alpha_ml" => self.ml_coeffs.alpha = f(v)?,
            "beta_ml" => self.ml_coeffs.beta = f(v)?,
            "melting_thickness_km" => self.melting_thickness_km = f(v)?,
            "st_q_level" => self.slow.process_noise_level = f(v)?,
            "st_q_drift" => self.slow.process_noise_drift = f(v)?,
            "st_r" => self.slow.measurement_noise = f(v)?,
            "st_p0_level" => self.slow.initial_covariance[0][0] = f(v)?,
            "st_p0_drift" => self.slow.initial_covariance[1][1] = f(v)?,
            "ft_q_level" => self.fast.process_noise_level = f(v)?,
            "ft_q_drift" => self.fast.process_noise_drift = f(v)?,
            "ft_r" => self.fast.measurement_noise = f(v)?,
            "ft_p0_level" => self.fast.initial_covariance[0][0] = f(v)?,
            "ft_p0_drift" => self.fast.initial_covariance[1][1] = f(v)?,
            "start_threshold_db" => self.detector.start_threshold = f(v)?,
            "end_threshold_db" => self.detector.end_threshold = f(v)?,
            "min_event_samples" => self.detector.min_event_samples = parse_u32(line, key, v)?,
            "sun_transit_masking" => self.sun_transit_masking = parse_bool(line, key, v)?,
            "fade_window" => self.fade.window = parse_u32(line, key, v)?,
            "fade_station_fraction" => self.fade.station_fraction = f(v)?,
            "fade_step_db" => self.fade.step_depth = f(v)?,
            "forecast_max_age_h" => self.forecast_max_age_h = f(v)?,
            "synth_mean_snr_db" => self.dry_model.mean_snr = f(v)?,
            "synth_diurnal_amplitude_db" => self.dry_model.diurnal_amplitude = f(v)?,
            "synth_diurnal_phase_rad" => self.dry_model.diurnal_phase = f(v)?,
            "synth_scint_std_db" => self.dry_model.scint_std = f(v)?,
            "synth_drift_db_per_day" => self.dry_model.drift_db_per_day = f(v)?,
            _ => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate_for_config()?;
        self.carrier.validate()?;
        self.ll_coeffs.validate("ll_coeffs")?;
        self.ml_coeffs.validate("ml_coeffs")?;
        if self.melting_thickness_km.is_nan() || self.melting_thickness_km <= 0.0 {
            return Err(Error::invalid("melting_thickness_km", "must be > 0"));
        }
        self.slow.validate()?;
        self.fast.validate()?;
        self.detector.validate()?;
        self.fade.validate()?;
        if self.forecast_max_age_h.is_nan() || self.forecast_max_age_h <= 0.0 {
            return Err(Error::invalid("forecast_max_age_h", "must be > 0"));
        }
        self.dry_model.validate()
    }

    /// Renders every key with its current value; [`EngineConfig::parse`]
    /// reads the result back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let r = |x: f64| format!("{x:?}");
        kv("atm_loss_db", r(linear_to_db(self.link.atm_loss)));
        kv("cloud_loss_db", r(linear_to_db(self.link.cloud_loss)));
        kv("t_cosmos", r(self.link.t_cosmos));
        kv("t_meteo", r(self.link.t_meteo));
        kv("t_ground", r(self.link.t_ground));
        kv("t_receiver", r(self.link.t_receiver));
        kv("flux_density", r(self.carrier.flux_density));
        kv("rx_gain_db", r(linear_to_db(self.carrier.rx_gain)));
        kv("frequency_ghz", r(SPEED_OF_LIGHT / self.carrier.wavelength / 1e9));
        kv("symbol_rate", r(self.carrier.symbol_rate));
        kv("alpha_ll", r(self.ll_coeffs.alpha));
        kv("beta_ll", r(self.ll_coeffs.beta));
        kv("alpha_ml", r(self.ml_coeffs.alpha));
        kv("beta_ml", r(self.ml_coeffs.beta));
        kv("melting_thickness_km", r(self.melting_thickness_km));
        for (p, t) in [("st", &self.slow), ("ft", &self.fast)] {
            kv(&format!("{p}_q_level"), r(t.process_noise_level));
            kv(&format!("{p}_q_drift"), r(t.process_noise_drift));
            kv(&format!("{p}_r"), r(t.measurement_noise));
            kv(&format!("{p}_p0_level"), r(t.initial_covariance[0][0]));
            kv(&format!("{p}_p0_drift"), r(t.initial_covariance[1][1]));
        }
        kv("start_threshold_db", r(self.detector.start_threshold));
        kv("end_threshold_db", r(self.detector.end_threshold));
        kv("min_event_samples", self.detector.min_event_samples.to_string());
        kv("sun_transit_masking", self.sun_transit_masking.to_string());
        kv("fade_window", self.fade.window.to_string());
        kv("fade_station_fraction", r(self.fade.station_fraction));
        kv("fade_step_db", r(self.fade.step_depth));
        kv("forecast_max_age_h", r(self.forecast_max_age_h));
        kv("synth_mean_snr_db", r(self.dry_model.mean_snr));
        kv("synth_diurnal_amplitude_db", r(self.dry_model.diurnal_amplitude));
        kv("synth_diurnal_phase_rad", r(self.dry_model.diurnal_phase));
        kv("synth_scint_std_db", r(self.dry_model.scint_std));
        kv("synth_drift_db_per_day", r(self.dry_model.drift_db_per_day));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(EngineConfig::parse("").unwrap(), EngineConfig::default());
        assert_eq!(
            EngineConfig::parse("# only a comment\n\n   \n").unwrap(),
            EngineConfig::default()
        );
    }

    #[test]
    fn default_xi() {
        let xi = EngineConfig::default().xi().unwrap();
        assert!((xi - 0.799).abs() < 1e-3);
    }

    #[test]
    fn overrides_and_db_conversion() {
        let c = EngineConfig::parse(
            "atm_loss_db = 0.2  # heavier\nstart_threshold_db=0.4\nsun_transit_masking = false\nfade_window = 5\n",
        )
        .unwrap();
        assert!((c.link.atm_loss - 10f64.powf(0.02)).abs() < 1e-15);
        assert_eq!(c.detector.start_threshold, 0.4);
        assert!(!c.sun_transit_masking);
        assert_eq!(c.fade.window, 5);
    }

    #[test]
    fn text_round_trip() {
        let mut c = EngineConfig::default();
        c.fast.process_noise_drift = 4e-6;
        c.dry_model.diurnal_amplitude = 0.5;
        c.sun_transit_masking = false;
        let back = EngineConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back.fast, c.fast);
        assert_eq!(back.dry_model, c.dry_model);
        assert_eq!(back.sun_transit_masking, c.sun_transit_masking);
        assert!((back.link.atm_loss / c.link.atm_loss - 1.0).abs() < 1e-14);
        assert!((back.carrier.wavelength / c.carrier.wavelength - 1.0).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match EngineConfig::parse("t_meteo = 275\nbogus = 1\n") {
            Err(Error::Config { line: 2, message }) => assert!(message.contains("bogus")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            EngineConfig::parse("t_meteo 275"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            EngineConfig::parse("t_meteo = warm"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            EngineConfig::parse("t_meteo = 1\nt_meteo = 2"),
            Err(Error::Config { line: 2, .. })
        ));
    }

    #[test]
    fn physically_invalid_values_are_rejected() {
        assert!(EngineConfig::parse("t_meteo = 2.78").is_err());
        assert!(EngineConfig::parse("atm_loss_db = -1").is_err());
        assert!(EngineConfig::parse("start_threshold_db = 0.05").is_err());
        assert!(EngineConfig::parse("fade_station_fraction = 0.5").is_err());
        assert!(EngineConfig::parse("min_event_samples = 0").is_err());
        assert!(EngineConfig::parse("st_r = 0").is_err());
    }
}
