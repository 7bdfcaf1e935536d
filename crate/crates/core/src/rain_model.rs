//! Two-layer stratiform rain attenuation model.
//!
//! Heights are measured downward from the 0 °C isotherm (h = 0) to the
//! station (h = h0). In the melting layer `[0, δ_ML]` the liquid rain rate
//! grows linearly from 0 to the ground rate; below it the rate is constant.
//! Specific attenuation follows `k = α·R^β` with separate coefficients per
//! layer, and the ice layer above the isotherm contributes nothing.
//! Integrating along a path slanted by the elevation angle gives
//!
//! ```text
//! A(R) = α_ML·R^β_ML·δ_ML / ((β_ML + 1)·sin θ) + α_LL·R^β_LL·(h0 − δ_ML) / sin θ   [dB]
//! ```
//!
//! which is strictly increasing in R and is inverted by bisection.

use serde::{Deserialize, Serialize};

use crate::link_budget::attenuation_from_ratio;
use crate::units::{db_to_linear, linear_to_db};
use crate::{Error, Result};

/// Upper end of the bisection bracket, mm/h.
pub const MAX_RAIN_RATE: f64 = 500.0;

/// Lowest elevation angle accepted from configuration, degrees.
pub const MIN_ELEVATION_DEG: f64 = 5.0;

/// Absolute tolerance on the attenuation reproduced by an inverted rate, dB.
pub const INVERSION_TOLERANCE_DB: f64 = 1e-9;

/// Power-law coefficients of specific attenuation, `k = alpha·R^beta` dB/km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCoeffs {
    pub alpha: f64,
    pub beta: f64,
}

impl PowerLawCoeffs {
    /// Liquid rain at 11.345 GHz.
    pub const LIQUID_KU: Self = Self {
        alpha: 0.0153,
        beta: 1.2531,
    };
    /// Melting layer at Ku band.
    pub const MELTING_KU: Self = Self {
        alpha: 0.0914,
        beta: 1.1068,
    };

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(name, format!("alpha {} must be > 0", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::invalid(name, format!("beta {} must be > 0", self.beta)));
        }
        Ok(())
    }

    /// Specific attenuation at rate `r`, dB/km.
    #[inline]
    pub fn specific_attenuation(&self, r: f64) -> f64 {
        self.alpha * r.powf(self.beta)
    }
}

/// Slant path through the melting and liquid layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainPathGeometry {
    /// Elevation angle, radians.
    pub elevation_angle: f64,
    /// Height of the 0 °C isotherm above the station, km.
    pub isotherm_height: f64,
    /// Vertical thickness of the melting layer, km.
    pub melting_thickness: f64,
    pub ml_coeffs: PowerLawCoeffs,
    pub ll_coeffs: PowerLawCoeffs,
}

impl RainPathGeometry {
    /// Validated constructor; requires `0 < δ_ML < h0` and an elevation of
    /// at least [`MIN_ELEVATION_DEG`].
    pub fn new(
        elevation_deg: f64,
        isotherm_height: f64,
        melting_thickness: f64,
        ml_coeffs: PowerLawCoeffs,
        ll_coeffs: PowerLawCoeffs,
    ) -> Result<Self> {
        let g = Self {
            elevation_angle: elevation_deg.to_radians(),
            isotherm_height,
            melting_thickness,
            ml_coeffs,
            ll_coeffs,
        };
        g.validate()?;
        Ok(g)
    }

    /// Ku-band coefficients with the given elevation, isotherm height and
    /// melting layer thickness.
    pub fn ku_band(elevation_deg: f64, isotherm_height: f64, melting_thickness: f64) -> Result<Self> {
        Self::new(
            elevation_deg,
            isotherm_height,
            melting_thickness,
            PowerLawCoeffs::MELTING_KU,
            PowerLawCoeffs::LIQUID_KU,
        )
    }

    pub fn with_isotherm_height(&self, isotherm_height: f64) -> Result<Self> {
        let g = Self {
            isotherm_height,
            ..*self
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let min = MIN_ELEVATION_DEG.to_radians();
        if !(self.elevation_angle.is_finite()
            && self.elevation_angle >= min
            && self.elevation_angle < std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::invalid(
                "elevation_angle",
                format!(
                    "{:.3}° outside [{MIN_ELEVATION_DEG}°, 90°)",
                    self.elevation_angle.to_degrees()
                ),
            ));
        }
        if !(self.isotherm_height.is_finite() && self.isotherm_height > 0.0) {
            return Err(Error::invalid(
                "isotherm_height",
                format!("{} km must be > 0", self.isotherm_height),
            ));
        }
        if !(self.melting_thickness.is_finite()
            && self.melting_thickness > 0.0
            && self.melting_thickness < self.isotherm_height)
        {
            return Err(Error::invalid(
                "melting_thickness",
                format!(
                    "{} km must lie in (0, h0 = {} km)",
                    self.melting_thickness, self.isotherm_height
                ),
            ));
        }
        self.ml_coeffs.validate("ml_coeffs")?;
        self.ll_coeffs.validate("ll_coeffs")
    }
}

/// Liquid rain rate at height `h` below the isotherm.
pub fn rate_at_height(h: f64, r_ll: f64, g: &RainPathGeometry) -> Result<f64> {
    if !(h.is_finite() && (0.0..=g.isotherm_height).contains(&h)) {
        return Err(Error::invalid(
            "h",
            format!("{h} km outside [0, {}]", g.isotherm_height),
        ));
    }
    if h <= g.melting_thickness {
        Ok(r_ll * h / g.melting_thickness)
    } else {
        Ok(r_ll)
    }
}

/// Attenuation contributed by the melting layer, dB.
pub fn ml_attenuation_db(r_ll: f64, g: &RainPathGeometry) -> f64 {
    let ml = g.ml_coeffs;
    ml.specific_attenuation(r_ll) * g.melting_thickness
        / (g.elevation_angle.sin() * (ml.beta + 1.0))
}

/// Attenuation contributed by the liquid layer, dB.
pub fn ll_attenuation_db(r_ll: f64, g: &RainPathGeometry) -> f64 {
    g.ll_coeffs.specific_attenuation(r_ll) * (g.isotherm_height - g.melting_thickness)
        / g.elevation_angle.sin()
}

/// Total slant-path rain attenuation for ground rate `r_ll`, dB.
pub fn total_attenuation_db(r_ll: f64, g: &RainPathGeometry) -> f64 {
    ml_attenuation_db(r_ll, g) + ll_attenuation_db(r_ll, g)
}

/// Thickness of a melting layer expressed with its own coefficients at the
/// full liquid rate: `δ_ML / (β_ML + 1)`.
pub fn equivalent_ml_thickness(melting_thickness: f64, ml: &PowerLawCoeffs) -> f64 {
    melting_thickness / (ml.beta + 1.0)
}

/// Scale factor and rate exponent that convert melting-layer thickness into
/// liquid-layer-equivalent thickness: the equivalent thickness is
/// `δ_ML·factor·R^exponent`.
pub fn liquid_equivalence_scale(ml: &PowerLawCoeffs, ll: &PowerLawCoeffs) -> (f64, f64) {
    let factor = ml.alpha / ll.alpha * (ll.beta + 1.0) / (ml.beta + 1.0);
    (factor, ml.beta - ll.beta)
}

/// Thickness of liquid rain (with liquid-layer coefficients) that attenuates
/// as much as the melting layer of `g` at ground rate `r_ll`.
pub fn liquid_equivalent_ml_thickness(r_ll: f64, g: &RainPathGeometry) -> f64 {
    let (factor, exponent) = liquid_equivalence_scale(&g.ml_coeffs, &g.ll_coeffs);
    g.melting_thickness * factor * r_ll.powf(exponent)
}

/// Ground rain rate whose total attenuation equals `l_rain_db`.
///
/// Bisection on `[0, MAX_RAIN_RATE]`; the result reproduces the input to
/// within [`INVERSION_TOLERANCE_DB`]. Attenuations above the model value at
/// `MAX_RAIN_RATE` are reported as [`Error::OutOfRange`].
pub fn invert_to_rain_rate(l_rain_db: f64, g: &RainPathGeometry) -> Result<f64> {
    if !l_rain_db.is_finite() {
        return Err(Error::NonFinite("l_rain_db"));
    }
    if l_rain_db < 0.0 {
        return Err(Error::invalid(
            "l_rain_db",
            format!("{l_rain_db} dB is negative"),
        ));
    }
    if l_rain_db == 0.0 {
        return Ok(0.0);
    }
    let top = total_attenuation_db(MAX_RAIN_RATE, g);
    if l_rain_db > top {
        return Err(Error::OutOfRange(l_rain_db));
    }

    let (mut lo, mut hi) = (0.0f64, MAX_RAIN_RATE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total_attenuation_db(mid, g) < l_rain_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (f_lo, f_hi) = (total_attenuation_db(lo, g), total_attenuation_db(hi, g));
    let rate = if (l_rain_db - f_lo).abs() <= (f_hi - l_rain_db).abs() {
        lo
    } else {
        hi
    };
    let residual = (total_attenuation_db(rate, g) - l_rain_db).abs();
    if residual > INVERSION_TOLERANCE_DB {
        return Err(Error::OutOfRange(l_rain_db));
    }
    Ok(rate)
}

/// One row of a characteristic curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub snr_drop_db: f64,
    pub rate_mm_per_h: f64,
}

/// Maps SNR drops (dB below the dry reference) onto rain rates.
///
/// Each drop is converted to a linear dry/wet ratio, turned into a rain
/// attenuation with ξ and inverted through the two-layer model.
pub fn characteristic_curve(
    g: &RainPathGeometry,
    xi: f64,
    snr_drop_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    snr_drop_grid
        .iter()
        .map(|&drop| {
            if !(drop.is_finite() && drop >= 0.0) {
                return Err(Error::invalid(
                    "snr_drop_db",
                    format!("{drop} must be finite and >= 0"),
                ));
            }
            let l_rain = attenuation_from_ratio(db_to_linear(drop), xi);
            let l_db = linear_to_db(l_rain).max(0.0);
            Ok(CurvePoint {
                snr_drop_db: drop,
                rate_mm_per_h: invert_to_rain_rate(l_db, g)?,
            })
        })
        .collect()
}
