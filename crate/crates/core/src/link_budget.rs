//! Downlink SNR forward models and rain-attenuation extraction.
//!
//! The dry SNR of a satellite downlink is
//!
//! ```text
//!            Φ·G_R·λ² / (4π·R_s·k)
//! SNR = ---------------------------------------------------
//!        L·[T_c/L + T_m·(1 − 1/L) + T_g + T_rx]
//! ```
//!
//! with `L = L_atm·L_cloud`; in rain `L` is further multiplied by `L_rain`.
//! Solving the dry/wet pair for `L_rain` gives
//! `L_rain = (SNR_dry/SNR_wet)·(1 − ξ) + ξ` where
//! `ξ = (T_m − T_c) / (L_atm·(T_m + T_g + T_rx))`.
//!
//! ξ omits `L_cloud`, so the extraction is exact only for `L_cloud = 1`
//! (the default). A nonzero cloud loss is accepted and reported through
//! [`LinkNoiseParams::is_exact`].

use serde::{Deserialize, Serialize};

use crate::units::{db_to_linear, linear_to_db};
use crate::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Loss factors and noise temperatures of the receive chain.
///
/// Losses are stored as linear factors (≥ 1); temperatures in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkNoiseParams {
    pub atm_loss: f64,
    pub cloud_loss: f64,
    pub t_cosmos: f64,
    pub t_meteo: f64,
    pub t_ground: f64,
    pub t_receiver: f64,
}

impl LinkNoiseParams {
    pub fn from_db(
        atm_loss_db: f64,
        cloud_loss_db: f64,
        t_cosmos: f64,
        t_meteo: f64,
        t_ground: f64,
        t_receiver: f64,
    ) -> Self {
        Self {
            atm_loss: db_to_linear(atm_loss_db),
            cloud_loss: db_to_linear(cloud_loss_db),
            t_cosmos,
            t_meteo,
            t_ground,
            t_receiver,
        }
    }

    /// Clear-sky Ku-band receive station: 0.09 dB gaseous loss, no cloud
    /// loss, T_c = 2.78 K, T_m = 275 K, T_g = 45 K, T_rx = 13.67 K.
    pub fn reference() -> Self {
        Self::from_db(0.09, 0.0, 2.78, 275.0, 45.0, 13.67)
    }

    pub fn atm_loss_db(&self) -> f64 {
        linear_to_db(self.atm_loss)
    }

    pub fn cloud_loss_db(&self) -> f64 {
        linear_to_db(self.cloud_loss)
    }

    /// True when attenuation extraction is algebraically exact (no cloud loss).
    pub fn is_exact(&self) -> bool {
        self.cloud_loss == 1.0
    }

    /// Checks the physical invariants shared by all operations.
    pub fn validate(&self) -> Result<()> {
        let temps = [
            ("t_cosmos", self.t_cosmos),
            ("t_meteo", self.t_meteo),
            ("t_ground", self.t_ground),
            ("t_receiver", self.t_receiver),
        ];
        for (name, t) in temps {
            if !t.is_finite() {
                return Err(Error::NonFinite(name));
            }
            if t < 0.0 {
                return Err(Error::invalid(name, format!("{t} K is negative")));
            }
        }
        if !(self.atm_loss.is_finite() && self.atm_loss >= 1.0) {
            return Err(Error::invalid(
                "atm_loss",
                format!("linear loss {} must be >= 1", self.atm_loss),
            ));
        }
        if !(self.cloud_loss.is_finite() && self.cloud_loss >= 1.0) {
            return Err(Error::invalid(
                "cloud_loss",
                format!("linear loss {} must be >= 1", self.cloud_loss),
            ));
        }
        if self.t_meteo < self.t_cosmos {
            return Err(Error::invalid(
                "t_meteo",
                format!(
                    "{} K is below the cosmic temperature {} K",
                    self.t_meteo, self.t_cosmos
                ),
            ));
        }
        Ok(())
    }

    /// Stricter check applied when loading a deployment config: ξ must be
    /// strictly positive for the SNR ratio to carry rain information.
    pub fn validate_for_config(&self) -> Result<()> {
        self.validate()?;
        if self.t_meteo <= self.t_cosmos {
            return Err(Error::invalid(
                "t_meteo",
                "must exceed t_cosmos (otherwise xi <= 0)",
            ));
        }
        Ok(())
    }

    /// Total clear-sky loss `L_atm·L_cloud`.
    fn clear_sky_loss(&self) -> f64 {
        self.atm_loss * self.cloud_loss
    }

    /// Bracketed denominator of the SNR formula for a total path loss `l`.
    fn noise_term(&self, l: f64) -> f64 {
        l * (self.t_cosmos / l + self.t_meteo * (1.0 - 1.0 / l) + self.t_ground + self.t_receiver)
    }
}

impl Default for LinkNoiseParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Carrier and antenna parameters of the received signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierParams {
    /// Power flux density at the antenna, W/m².
    pub flux_density: f64,
    /// Receive antenna gain, linear.
    pub rx_gain: f64,
    /// Carrier wavelength, m.
    pub wavelength: f64,
    /// Symbol rate, 1/s.
    pub symbol_rate: f64,
    /// Boltzmann constant, J/K.
    pub boltzmann: f64,
}

impl CarrierParams {
    /// 11.345 GHz carrier at 27.5 Mbaud into a 37 dBi dish, with the flux
    /// density chosen so that [`snr_dry`] with [`LinkNoiseParams::reference`]
    /// gives 10.428 dB.
    pub fn reference() -> Self {
        Self {
            flux_density: 1.029_635_769_446_029_5e-12,
            rx_gain: db_to_linear(37.0),
            wavelength: SPEED_OF_LIGHT / 11.345e9,
            symbol_rate: 27.5e6,
            boltzmann: BOLTZMANN,
        }
    }

    /// Flux density that yields `target_snr_db` in dry conditions for the
    /// given antenna, carrier and noise parameters.
    pub fn flux_for_dry_snr(
        target_snr_db: f64,
        rx_gain: f64,
        wavelength: f64,
        symbol_rate: f64,
        noise: &LinkNoiseParams,
    ) -> f64 {
        let noise_term = noise.noise_term(noise.clear_sky_loss());
        db_to_linear(target_snr_db) * 4.0 * std::f64::consts::PI * symbol_rate * BOLTZMANN
            * noise_term
            / (rx_gain * wavelength * wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("flux_density", self.flux_density),
            ("rx_gain", self.rx_gain),
            ("wavelength", self.wavelength),
            ("symbol_rate", self.symbol_rate),
            ("boltzmann", self.boltzmann),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("{v} must be > 0")));
            }
        }
        Ok(())
    }

    /// `Φ·G_R·λ² / (4π·R_s·k)`, in kelvin.
    fn signal_temperature(&self) -> f64 {
        self.flux_density * self.rx_gain * self.wavelength * self.wavelength
            / (4.0 * std::f64::consts::PI * self.symbol_rate * self.boltzmann)
    }
}

impl Default for CarrierParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Noise-coupling constant ξ = (T_m − T_c) / (L_atm·(T_m + T_g + T_rx)).
///
/// Lies in `[0, 1]`; it is 0 when `T_m = T_c`. Config loading additionally
/// rejects ξ = 0 (see [`LinkNoiseParams::validate_for_config`]).
pub fn compute_xi(p: &LinkNoiseParams) -> Result<f64> {
    p.validate()?;
    let denom = p.atm_loss * (p.t_meteo + p.t_ground + p.t_receiver);
    if denom <= 0.0 {
        return Err(Error::invalid(
            "t_meteo",
            "T_m + T_g + T_rx must be positive",
        ));
    }
    Ok((p.t_meteo - p.t_cosmos) / denom)
}

/// Dry-condition Es/N0, linear.
pub fn snr_dry(c: &CarrierParams, p: &LinkNoiseParams) -> f64 {
    c.signal_temperature() / p.noise_term(p.clear_sky_loss())
}

/// Es/N0 with an additional rain attenuation `l_rain` (linear, ≥ 1).
pub fn snr_wet(c: &CarrierParams, p: &LinkNoiseParams, l_rain: f64) -> Result<f64> {
    if !l_rain.is_finite() {
        return Err(Error::NonFinite("l_rain"));
    }
    if l_rain < 1.0 {
        return Err(Error::invalid(
            "l_rain",
            format!("{l_rain} is below 1 (rain cannot amplify)"),
        ));
    }
    Ok(c.signal_temperature() / p.noise_term(p.clear_sky_loss() * l_rain))
}

/// Rain attenuation `L_rain = (dry/wet)·(1 − ξ) + ξ` from linear SNRs.
pub fn extract_rain_attenuation(snr_dry_lin: f64, snr_wet_lin: f64, xi: f64) -> Result<f64> {
    if !(snr_dry_lin.is_finite() && snr_wet_lin.is_finite() && xi.is_finite()) {
        return Err(Error::NonFinite("snr"));
    }
    if snr_wet_lin <= 0.0 {
        return Err(Error::MalformedMeasurement(format!(
            "wet SNR {snr_wet_lin} is not positive"
        )));
    }
    if snr_dry_lin <= 0.0 {
        return Err(Error::MalformedMeasurement(format!(
            "dry SNR {snr_dry_lin} is not positive"
        )));
    }
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::invalid("xi", format!("{xi} outside [0, 1)")));
    }
    Ok(attenuation_from_ratio(snr_dry_lin / snr_wet_lin, xi))
}

/// `ratio·(1 − ξ) + ξ` for a dry/wet SNR ratio.
#[inline]
pub(crate) fn attenuation_from_ratio(ratio: f64, xi: f64) -> f64 {
    ratio * (1.0 - xi) + xi
}
