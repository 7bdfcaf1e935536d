//! Rain start/stop detection and per-sample rain-rate estimation.
//!
//! The detection statistic is `ε = η_ST − η_FT`, the slow tracker output
//! minus the fast one. Rain starts once ε stays at or above the start
//! threshold for `min_event_samples` consecutive samples; the slow
//! tracker's output at the first of those samples becomes the frozen dry
//! reference for the whole event. While raining, the attenuation is
//! `(ref/η_FT)·(1 − ξ) + ξ` on linear SNRs and the rate comes from
//! inverting the two-layer model. Rain ends when ε falls to the end
//! threshold or below.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::link_budget::attenuation_from_ratio;
use crate::rain_model::{invert_to_rain_rate, RainPathGeometry};
use crate::units::{db_to_linear, linear_to_db};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub start_threshold: f64,
    pub end_threshold: f64,
    pub min_event_samples: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            start_threshold: 0.3,
            end_threshold: 0.1,
            min_event_samples: 2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.end_threshold.is_finite() && self.end_threshold > 0.0) {
            return Err(Error::invalid("end_threshold", "must be > 0"));
        }
        if !(self.start_threshold.is_finite() && self.start_threshold > self.end_threshold) {
            return Err(Error::invalid(
                "start_threshold",
                "must exceed end_threshold",
            ));
        }
        if self.min_event_samples == 0 {
            return Err(Error::invalid("min_event_samples", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Dry,
    Raining,
}

/// One rain-rate estimate inside an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub k: i64,
    pub epsilon_db: f64,
    pub l_rain_linear: f64,
    pub rate_mm_per_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RateOutcome {
    Valid(RateSample),
    /// The attenuation could not be inverted; the sample carries no rate.
    Invalid { k: i64, epsilon_db: f64, reason: String },
}

/// An event closed by the detector, indexed on the sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedEvent {
    pub onset_k: i64,
    pub end_k: i64,
    pub dry_ref_db: f64,
    pub geometry: Option<RainPathGeometry>,
    pub samples: Vec<RateSample>,
    pub invalid_samples: u32,
    pub peak_rate: f64,
    pub cumulative_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Rain declared. The slow tracker must be frozen at its state from
    /// `onset_k`, whose output is `dry_ref_db`.
    Start { onset_k: i64, dry_ref_db: f64 },
    /// Rain over; the slow tracker resumes.
    End(ClosedEvent),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorStep {
    pub epsilon_db: f64,
    pub rate: Option<RateOutcome>,
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OpenEvent {
    onset_k: i64,
    dry_ref_db: f64,
    geometry: Option<RainPathGeometry>,
    samples: Vec<RateSample>,
    invalid_samples: u32,
}

/// Per-station detector. Serializable for checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub phase: Phase,
    /// Slow tracker output when the current event began; `Some` iff raining.
    pub frozen_dry_ref: Option<f64>,
    pub event_start_k: Option<i64>,
    pub consecutive_above: u32,
    /// First sample of the current run of above-threshold samples and the
    /// slow tracker output there.
    pending_onset: Option<(i64, f64)>,
    open: Option<OpenEvent>,
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

impl DetectorState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Dry,
            frozen_dry_ref: None,
            event_start_k: None,
            consecutive_above: 0,
            pending_onset: None,
            open: None,
        }
    }

    pub fn is_raining(&self) -> bool {
        self.phase == Phase::Raining
    }

    /// Sample index where the current above-threshold run began.
    pub fn pending_onset_k(&self) -> Option<i64> {
        self.pending_onset.map(|(k, _)| k)
    }

    /// Advances the detector by one sample.
    ///
    /// `geometry` is captured when an event starts and used for the whole
    /// event; `None` makes every rate of that event invalid. With
    /// `starts_allowed == false` no event can start on this sample and any
    /// pending run is discarded.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        k: i64,
        eta_st: f64,
        eta_ft: f64,
        geometry: Option<&RainPathGeometry>,
        xi: f64,
        cfg: &DetectorConfig,
        starts_allowed: bool,
    ) -> Result<DetectorStep> {
        if !(eta_st.is_finite() && eta_ft.is_finite()) {
            return Err(Error::NonFinite("tracker output"));
        }
        match self.phase {
            Phase::Dry => Ok(self.step_dry(k, eta_st, eta_ft, geometry, xi, cfg, starts_allowed)),
            Phase::Raining => Ok(self.step_raining(k, eta_st, eta_ft, xi, cfg)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step_dry(
        &mut self,
        k: i64,
        eta_st: f64,
        eta_ft: f64,
        geometry: Option<&RainPathGeometry>,
        xi: f64,
        cfg: &DetectorConfig,
        starts_allowed: bool,
    ) -> DetectorStep {
        let epsilon = eta_st - eta_ft;
        let mut out = DetectorStep {
            epsilon_db: epsilon,
            rate: None,
            boundary: None,
        };
        if !starts_allowed || epsilon < cfg.start_threshold {
            self.consecutive_above = 0;
            self.pending_onset = None;
            return out;
        }
        if self.consecutive_above == 0 {
            self.pending_onset = Some((k, eta_st));
        }
        self.consecutive_above += 1;
        if self.consecutive_above < cfg.min_event_samples {
            return out;
        }

        let (onset_k, dry_ref) = self.pending_onset.take().unwrap_or((k, eta_st));
        self.phase = Phase::Raining;
        self.frozen_dry_ref = Some(dry_ref);
        self.event_start_k = Some(onset_k);
        self.consecutive_above = 0;
        self.open = Some(OpenEvent {
            onset_k,
            dry_ref_db: dry_ref,
            geometry: geometry.copied(),
            samples: Vec::new(),
            invalid_samples: 0,
        });
        let epsilon = dry_ref - eta_ft;
        out.epsilon_db = epsilon;
        out.rate = Some(self.record_rate(k, epsilon, eta_ft, xi));
        out.boundary = Some(Boundary::Start {
            onset_k,
            dry_ref_db: dry_ref,
        });
        out
    }

    fn step_raining(
        &mut self,
        k: i64,
        eta_st: f64,
        eta_ft: f64,
        xi: f64,
        cfg: &DetectorConfig,
    ) -> DetectorStep {
        let epsilon = eta_st - eta_ft;
        if epsilon <= cfg.end_threshold {
            let event = self.close(k);
            return DetectorStep {
                epsilon_db: epsilon,
                rate: None,
                boundary: Some(Boundary::End(event)),
            };
        }
        DetectorStep {
            epsilon_db: epsilon,
            rate: Some(self.record_rate(k, epsilon, eta_ft, xi)),
            boundary: None,
        }
    }

    /// Shifts the frozen reference of an ongoing event by `delta` dB.
    pub fn rebaseline(&mut self, delta: f64) {
        if let Some(r) = self.frozen_dry_ref.as_mut() {
            *r += delta;
        }
        if let Some(open) = self.open.as_mut() {
            open.dry_ref_db += delta;
        }
    }

    /// Drops any partially counted start.
    pub fn clear_pending(&mut self) {
        self.consecutive_above = 0;
        self.pending_onset = None;
    }

    fn record_rate(&mut self, k: i64, epsilon: f64, eta_ft: f64, xi: f64) -> RateOutcome {
        let open = self.open.as_mut().expect("raining implies an open event");
        let outcome = match &open.geometry {
            None => RateOutcome::Invalid {
                k,
                epsilon_db: epsilon,
                reason: "no path geometry for this event".into(),
            },
            Some(g) => match estimate_rate(open.dry_ref_db, eta_ft, xi, g) {
                Ok((l_rain_linear, rate_mm_per_h)) => RateOutcome::Valid(RateSample {
                    k,
                    epsilon_db: epsilon,
                    l_rain_linear,
                    rate_mm_per_h,
                }),
                Err(e) => RateOutcome::Invalid {
                    k,
                    epsilon_db: epsilon,
                    reason: e.to_string(),
                },
            },
        };
        match &outcome {
            RateOutcome::Valid(s) => open.samples.push(*s),
            RateOutcome::Invalid { .. } => open.invalid_samples += 1,
        }
        outcome
    }

    fn close(&mut self, k: i64) -> ClosedEvent {
        let open = self.open.take().expect("raining implies an open event");
        self.phase = Phase::Dry;
        self.frozen_dry_ref = None;
        self.event_start_k = None;
        self.consecutive_above = 0;
        self.pending_onset = None;
        let peak_rate = open
            .samples
            .iter()
            .map(|s| s.rate_mm_per_h)
            .fold(0.0, f64::max);
        let cumulative_mm = trapezoid_mm(&open.samples);
        ClosedEvent {
            onset_k: open.onset_k,
            end_k: k,
            dry_ref_db: open.dry_ref_db,
            geometry: open.geometry,
            samples: open.samples,
            invalid_samples: open.invalid_samples,
            peak_rate,
            cumulative_mm,
        }
    }
}

/// Rain attenuation (linear) and rate from a dry reference and the current
/// fast-tracker output, both in dB. A fast tracker above the reference
/// means no rain attenuation and yields rate 0.
pub fn estimate_rate(
    dry_ref_db: f64,
    eta_ft_db: f64,
    xi: f64,
    g: &RainPathGeometry,
) -> Result<(f64, f64)> {
    let ratio = db_to_linear(dry_ref_db) / db_to_linear(eta_ft_db);
    let l_rain = attenuation_from_ratio(ratio, xi);
    if !l_rain.is_finite() || l_rain <= 0.0 {
        return Err(Error::MalformedMeasurement(format!(
            "rain attenuation {l_rain} from ratio {ratio}"
        )));
    }
    let l_db = linear_to_db(l_rain).max(0.0);
    let rate = invert_to_rain_rate(l_db, g)?;
    Ok((l_rain, rate))
}

/// Trapezoidal integral of a rate series sampled on the minute grid, mm.
pub fn trapezoid_mm(samples: &[RateSample]) -> f64 {
    samples
        .windows(2)
        .map(|w| {
            let hours = (w[1].k - w[0].k) as f64 / 60.0;
            0.5 * (w[0].rate_mm_per_h + w[1].rate_mm_per_h) * hours
        })
        .sum()
}

/// Gaussian upper-tail probability that ε exceeds `threshold`.
pub fn false_alarm_probability(eps_mean: f64, eps_std: f64, threshold: f64) -> Result<f64> {
    if !(eps_std.is_finite() && eps_std > 0.0) {
        return Err(Error::invalid("eps_std", "must be > 0"));
    }
    if threshold == f64::INFINITY {
        return Ok(0.0);
    }
    let z = (threshold - eps_mean) / eps_std;
    Ok(0.5 * erfc(z / std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rain_model::total_attenuation_db;

    const XI: f64 = 0.799;

    fn geometry() -> RainPathGeometry {
        RainPathGeometry::ku_band(40.0, 3.0, 0.5).unwrap()
    }

    /// Feeds ε values with the slow tracker fixed at 10 dB.
    fn drive(eps: &[f64], cfg: &DetectorConfig) -> (DetectorState, Vec<DetectorStep>) {
        let mut d = DetectorState::new();
        let g = geometry();
        let steps = eps
            .iter()
            .enumerate()
            .map(|(k, e)| d.step(k as i64, 10.0, 10.0 - e, Some(&g), XI, cfg, true).unwrap())
            .collect();
        (d, steps)
    }

    fn boundaries(steps: &[DetectorStep]) -> Vec<&Boundary> {
        steps.iter().filter_map(|s| s.boundary.as_ref()).collect()
    }

    #[test]
    fn all_zero_epsilon_is_silent() {
        let (d, steps) = drive(&[0.0; 500], &DetectorConfig::default());
        assert!(steps.iter().all(|s| s.boundary.is_none() && s.rate.is_none()));
        assert_eq!(d.phase, Phase::Dry);
    }

    #[test]
    fn short_excursion_opens_and_closes_one_event() {
        let mut eps = vec![0.0; 10];
        eps.extend([0.31, 0.31]);
        eps.extend([0.0; 10]);
        let (d, steps) = drive(&eps, &DetectorConfig::default());
        let b = boundaries(&steps);
        assert_eq!(b.len(), 2);
        assert!(matches!(b[0], Boundary::Start { onset_k: 10, .. }));
        match b[1] {
            Boundary::End(ev) => {
                assert_eq!(ev.onset_k, 10);
                assert_eq!(ev.end_k, 12);
                assert!(ev.onset_k < ev.end_k);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(d.phase, Phase::Dry);
        assert!(d.frozen_dry_ref.is_none());
    }

    #[test]
    fn single_spike_is_debounced() {
        let mut eps = vec![0.0; 10];
        eps.push(0.5);
        eps.extend([0.0; 10]);
        let (_, steps) = drive(&eps, &DetectorConfig::default());
        assert!(boundaries(&steps).is_empty());
    }

    #[test]
    fn one_db_drop_rate_regression() {
        // dry ref 10.43 dB, fast tracker at 9.43 dB
        let (l, rate) = estimate_rate(10.43, 9.43, XI, &geometry()).unwrap();
        let expected_l = 10f64.powf(0.1) * (1.0 - XI) + XI;
        assert!((l - expected_l).abs() < 1e-12);
        assert!((l - 1.052).abs() < 5e-4);
        assert!((linear_to_db(l) - 0.2203).abs() < 5e-4);
        assert!((total_attenuation_db(rate, &geometry()) - linear_to_db(l)).abs() < 1e-9);
        assert!((rate - 2.045_022_05).abs() < 1e-7, "{rate}");
    }

    #[test]
    fn fast_tracker_above_reference_gives_zero_rate() {
        let (l, rate) = estimate_rate(10.0, 10.2, XI, &geometry()).unwrap();
        assert!(l < 1.0);
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn frozen_reference_is_slow_output_at_onset() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        let g = geometry();
        d.step(0, 10.40, 10.40, Some(&g), XI, &cfg, true).unwrap();
        d.step(1, 10.39, 10.0, Some(&g), XI, &cfg, true).unwrap();
        let s = d.step(2, 10.38, 9.5, Some(&g), XI, &cfg, true).unwrap();
        assert_eq!(
            s.boundary,
            Some(Boundary::Start {
                onset_k: 1,
                dry_ref_db: 10.39
            })
        );
        assert_eq!(d.frozen_dry_ref, Some(10.39));
        assert!((s.epsilon_db - 0.89).abs() < 1e-12);
        assert!(matches!(s.rate, Some(RateOutcome::Valid(_))));
    }

    #[test]
    fn hysteresis_band_produces_nothing() {
        let eps: Vec<f64> = (0..1000)
            .map(|i| 0.2 + 0.05 * (i as f64 * 0.7).sin())
            .collect();
        let (_, steps) = drive(&eps, &DetectorConfig::default());
        assert!(boundaries(&steps).is_empty());

        let mut raining = vec![0.0, 1.0, 1.0];
        raining.extend(eps.iter().copied());
        let (d, steps) = drive(&raining, &DetectorConfig::default());
        assert_eq!(boundaries(&steps).len(), 1);
        assert!(d.is_raining());
    }

    #[test]
    fn boundaries_alternate() {
        let eps: Vec<f64> = (0..5000)
            .map(|i| 0.5 * ((i as f64) * 0.05).sin() + 0.1 * ((i as f64) * 1.3).cos())
            .collect();
        let (_, steps) = drive(&eps, &DetectorConfig::default());
        let b = boundaries(&steps);
        assert!(b.len() > 4);
        for (i, x) in b.iter().enumerate() {
            assert_eq!(matches!(x, Boundary::Start { .. }), i % 2 == 0);
        }
    }

    #[test]
    fn starts_can_be_blocked() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        let g = geometry();
        for k in 0..10 {
            let s = d.step(k, 10.0, 9.0, Some(&g), XI, &cfg, false).unwrap();
            assert!(s.boundary.is_none());
        }
        assert_eq!(d.consecutive_above, 0);
    }

    #[test]
    fn missing_geometry_marks_rates_invalid() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        for k in 0..3 {
            d.step(k, 10.0, 9.0, None, XI, &cfg, true).unwrap();
        }
        let s = d.step(3, 10.0, 9.0, None, XI, &cfg, true).unwrap();
        assert!(matches!(s.rate, Some(RateOutcome::Invalid { .. })));
        let end = d.step(4, 10.0, 10.0, None, XI, &cfg, true).unwrap();
        match end.boundary {
            Some(Boundary::End(ev)) => {
                assert!(ev.samples.is_empty());
                assert!(ev.invalid_samples >= 2);
                assert_eq!(ev.cumulative_mm, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_attenuation_is_invalid_not_zero() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        let g = geometry();
        d.step(0, 10.0, 9.0, Some(&g), XI, &cfg, true).unwrap();
        d.step(1, 10.0, 9.0, Some(&g), XI, &cfg, true).unwrap();
        let s = d.step(2, 10.0, -300.0, Some(&g), XI, &cfg, true).unwrap();
        assert!(matches!(s.rate, Some(RateOutcome::Invalid { .. })));
    }

    #[test]
    fn event_cumulative_is_trapezoid_of_rates() {
        let mut eps = vec![0.0; 3];
        eps.extend((0..60).map(|i| 0.5 + 2.0 * (i as f64 / 59.0 * std::f64::consts::PI).sin()));
        eps.extend([0.0; 3]);
        let (_, steps) = drive(&eps, &DetectorConfig::default());
        let ev = steps
            .iter()
            .find_map(|s| match &s.boundary {
                Some(Boundary::End(ev)) => Some(ev.clone()),
                _ => None,
            })
            .unwrap();
        let manual: f64 = ev
            .samples
            .windows(2)
            .map(|w| 0.5 * (w[0].rate_mm_per_h + w[1].rate_mm_per_h) / 60.0)
            .sum();
        assert!((ev.cumulative_mm - manual).abs() < 1e-12);
        assert!(ev.samples.iter().all(|s| s.rate_mm_per_h >= 0.0 && s.rate_mm_per_h.is_finite()));
        let peak = ev.samples.iter().map(|s| s.rate_mm_per_h).fold(0.0, f64::max);
        assert_eq!(ev.peak_rate, peak);
    }

    #[test]
    fn gaussian_tail() {
        assert!((false_alarm_probability(0.2, 0.1, 0.2).unwrap() - 0.5).abs() < 1e-15);
        let p = false_alarm_probability(0.0049, 0.0852, 0.3).unwrap();
        assert!((p - 2.7e-4).abs() < 0.1e-4, "{p}");
        assert!((p - 2.664_843e-4).abs() < 1e-9, "{p}");
        assert_eq!(false_alarm_probability(0.0, 1.0, f64::INFINITY).unwrap(), 0.0);
        assert!(false_alarm_probability(0.0, 0.0, 0.3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let inverted = DetectorConfig {
            start_threshold: 0.1,
            end_threshold: 0.3,
            ..Default::default()
        };
        assert!(inverted.validate().is_err());
        let zero = DetectorConfig {
            min_event_samples: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }
}
