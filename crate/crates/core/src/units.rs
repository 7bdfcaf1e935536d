//! dB/linear conversions.
//!
//! Power ratios only: `x_dB = 10·log10(x_lin)` everywhere in the crate. All
//! attenuation and SNR-ratio algebra is done on linear values; conversion
//! happens at I/O boundaries.

/// Amplitude resolution of the receiver's Es/N0 reports, in dB.
pub const SNR_RESOLUTION_DB: f64 = 0.1;

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Rounds `x` to the nearest multiple of `step`.
#[inline]
pub fn quantize(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Variance of uniform rounding error for a quantizer of the given step.
#[inline]
pub fn quantization_variance(step: f64) -> f64 {
    step * step / 12.0
}
