//! Seeded synthetic Es/N0 telemetry with known rain.
//!
//! A trace is built in layers on the one-minute grid:
//!
//! 1. a clean dry baseline (mean, 24 h sinusoid, linear drift);
//! 2. rain, pushed through the forward link model so the SNR drop is the
//!    one a receiver would see for the scenario's rain rate;
//! 3. impairments (sun-transit notches, transponder gain steps);
//! 4. white scintillation noise, then quantization to 0.1 dB.
//!
//! Every layer is kept separately so tests can score the engine against the
//! exact truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::link_budget::{snr_dry, snr_wet, CarrierParams, LinkNoiseParams};
use crate::rain_model::{total_attenuation_db, RainPathGeometry};
use crate::time::SAMPLE_PERIOD_S;
use crate::trackers::SCINTILLATION_STD_DB;
use crate::units::{db_to_linear, linear_to_db, quantize, SNR_RESOLUTION_DB};
use crate::{Error, Result};

pub const DIURNAL_PERIOD_S: f64 = 86_400.0;
pub const SAMPLES_PER_DAY: usize = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrySignalModel {
    pub mean_snr: f64,
    pub diurnal_amplitude: f64,
    pub diurnal_phase: f64,
    pub scint_std: f64,
    pub drift_db_per_day: f64,
}

impl Default for DrySignalModel {
    fn default() -> Self {
        Self {
            mean_snr: 10.428,
            diurnal_amplitude: 0.3,
            diurnal_phase: 0.0,
            scint_std: SCINTILLATION_STD_DB,
            drift_db_per_day: 0.0,
        }
    }
}

impl DrySignalModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mean_snr", self.mean_snr),
            ("diurnal_phase", self.diurnal_phase),
            ("drift_db_per_day", self.drift_db_per_day),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if !(self.scint_std.is_finite() && self.scint_std >= 0.0) {
            return Err(Error::invalid("scint_std", "must be >= 0"));
        }
        if !(self.diurnal_amplitude.is_finite() && self.diurnal_amplitude >= 0.0) {
            return Err(Error::invalid("diurnal_amplitude", "must be >= 0"));
        }
        Ok(())
    }

    /// Noise-free dry SNR (dB) at sample offset `i`.
    pub fn clean_at(&self, i: usize) -> f64 {
        let t = i as f64 * SAMPLE_PERIOD_S as f64;
        self.mean_snr
            + self.diurnal_amplitude
                * (2.0 * std::f64::consts::PI * t / DIURNAL_PERIOD_S + self.diurnal_phase).sin()
            + self.drift_db_per_day * t / DIURNAL_PERIOD_S
    }
}

/// One station's synthetic stream, split into its layers. All series are in
/// dB and indexed by sample offset from `start_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub start_k: i64,
    /// Dry baseline without rain, impairments or noise.
    pub dry_clean: Vec<f64>,
    /// SNR drop caused by rain (≥ 0).
    pub rain_drop: Vec<f64>,
    /// Additive impairment offsets (notches, gain steps).
    pub impairment: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SyntheticTrace {
    pub fn len(&self) -> usize {
        self.dry_clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dry_clean.is_empty()
    }

    /// Noise-free SNR including rain and impairments.
    pub fn clean(&self, i: usize) -> f64 {
        self.dry_clean[i] - self.rain_drop[i] + self.impairment[i]
    }

    /// Noise-free SNR including rain but no impairments.
    pub fn wet_clean(&self, i: usize) -> f64 {
        self.dry_clean[i] - self.rain_drop[i]
    }

    /// The measured stream: clean signal plus noise, quantized to 0.1 dB.
    pub fn samples(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| quantize(self.clean(i) + self.noise[i], SNR_RESOLUTION_DB))
            .collect()
    }
}

/// Random stream for one station: `seed` selects the run, `stream` the
/// station, so stations stay independent of each other and of their order.
pub fn station_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates `n` dry samples starting at grid index `start_k`.
pub fn gen_dry(model: &DrySignalModel, start_k: i64, n: usize, rng: &mut ChaCha8Rng) -> Result<SyntheticTrace> {
    model.validate()?;
    let normal = Normal::new(0.0, model.scint_std)
        .map_err(|e| Error::invalid("scint_std", e.to_string()))?;
    let dry_clean = (0..n).map(|i| model.clean_at(i)).collect();
    let noise = (0..n).map(|_| normal.sample(rng)).collect();
    Ok(SyntheticTrace {
        start_k,
        dry_clean,
        rain_drop: vec![0.0; n],
        impairment: vec![0.0; n],
        noise,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RainShape {
    /// Linear ramp up over the first quarter, flat, ramp down over the last
    /// quarter.
    Trapezoid,
    /// Piecewise linear through 0, the peak rate at one quarter, 30 % of
    /// it at half time, 70 % at three quarters, and 0 at the end.
    DoublePeak,
}

const DOUBLE_PEAK_KNOTS: [f64; 5] = [0.0, 1.0, 0.3, 0.7, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainEventSpec {
    /// Offset of the first rainy minute from the start of the trace.
    pub start_min: u32,
    pub duration_min: u32,
    pub shape: RainShape,
    pub peak_rate: f64,
    /// Station receiving the event; `None` means every station.
    #[serde(default)]
    pub station: Option<String>,
}

impl RainEventSpec {
    pub fn end_min(&self) -> u32 {
        self.start_min + self.duration_min
    }

    /// Rain rate (mm/h) at `tau` minutes after the event start.
    pub fn rate_at(&self, tau: f64) -> f64 {
        let d = self.duration_min as f64;
        if d <= 0.0 || !(0.0..=d).contains(&tau) {
            return 0.0;
        }
        let x = tau / d;
        match self.shape {
            RainShape::Trapezoid => self.peak_rate * (x / 0.25).min(1.0).min((1.0 - x) / 0.25),
            RainShape::DoublePeak => {
                let u = x * 4.0;
                let i = (u.floor() as usize).min(3);
                let f = u - i as f64;
                self.peak_rate * (DOUBLE_PEAK_KNOTS[i] * (1.0 - f) + DOUBLE_PEAK_KNOTS[i + 1] * f)
            }
        }
    }

    /// Closed-form area under the rate profile, mm.
    pub fn analytic_total_mm(&self) -> f64 {
        let hours = self.duration_min as f64 / 60.0;
        let shape_factor = match self.shape {
            RainShape::Trapezoid => 0.75,
            RainShape::DoublePeak => {
                0.25 * DOUBLE_PEAK_KNOTS.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>()
            }
        };
        shape_factor * self.peak_rate * hours
    }

    fn applies_to(&self, station: &str) -> bool {
        self.station.as_deref().is_none_or(|s| s == station)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainStepSpec {
    pub at_min: u32,
    pub delta_db: f64,
    #[serde(default)]
    pub station: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunTransitSpec {
    pub start_min: u32,
    pub duration_min: u32,
    pub depth_db: f64,
}

/// Rain events and gain steps of a simulation run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RainScenario {
    /// Trace length in minutes.
    pub duration_min: u32,
    #[serde(default, rename = "event")]
    pub events: Vec<RainEventSpec>,
    #[serde(default, rename = "gain_step")]
    pub gain_steps: Vec<GainStepSpec>,
}

impl RainScenario {
    /// A week of dry weather broken by three rain events peaking at 5, 20
    /// and 50 mm/h, two days apart.
    pub fn standard() -> Self {
        let ev = |day: u32, duration_min, shape, peak_rate| RainEventSpec {
            start_min: day * SAMPLES_PER_DAY as u32 + 600,
            duration_min,
            shape,
            peak_rate,
            station: None,
        };
        Self {
            duration_min: 7 * SAMPLES_PER_DAY as u32,
            events: vec![
                ev(1, 120, RainShape::Trapezoid, 5.0),
                ev(3, 90, RainShape::DoublePeak, 20.0),
                ev(5, 60, RainShape::Trapezoid, 50.0),
            ],
            gain_steps: Vec::new(),
        }
    }

    pub fn parse_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.events {
            if !(e.peak_rate.is_finite() && e.peak_rate >= 0.0) {
                return Err(Error::invalid("peak_rate", format!("{} must be >= 0", e.peak_rate)));
            }
            if e.end_min() > self.duration_min {
                return Err(Error::invalid(
                    "event",
                    format!("event at minute {} runs past the end of the trace", e.start_min),
                ));
            }
        }
        for (i, a) in self.events.iter().enumerate() {
            for b in &self.events[i + 1..] {
                let shared = match (&a.station, &b.station) {
                    (Some(x), Some(y)) => x == y,
                    _ => true,
                };
                if shared && a.start_min < b.end_min() && b.start_min < a.end_min() {
                    return Err(Error::invalid(
                        "event",
                        format!("events at minutes {} and {} overlap", a.start_min, b.start_min),
                    ));
                }
            }
        }
        for g in &self.gain_steps {
            if !g.delta_db.is_finite() {
                return Err(Error::NonFinite("delta_db"));
            }
        }
        Ok(())
    }

    /// Events that apply to `station`, in time order.
    pub fn events_for(&self, station: &str) -> Vec<&RainEventSpec> {
        let mut v: Vec<_> = self.events.iter().filter(|e| e.applies_to(station)).collect();
        v.sort_by_key(|e| e.start_min);
        v
    }
}

/// Per-sample ground truth of one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub k: i64,
    pub rate_mm_per_h: f64,
    pub l_rain_db: f64,
}

/// Pushes the scenario's rain through the forward model into `trace` and
/// returns the truth series (one entry per sample, zero outside events).
pub fn inject_rain(
    trace: &mut SyntheticTrace,
    events: &[&RainEventSpec],
    g: &RainPathGeometry,
    p: &LinkNoiseParams,
    c: &CarrierParams,
) -> Result<Vec<TruthSample>> {
    g.validate()?;
    let dry = snr_dry(c, p);
    let mut truth: Vec<TruthSample> = (0..trace.len())
        .map(|i| TruthSample {
            k: trace.start_k + i as i64,
            rate_mm_per_h: 0.0,
            l_rain_db: 0.0,
        })
        .collect();
    for e in events {
        let end = (e.end_min() as usize).min(trace.len());
        let last = end.min(trace.len().saturating_sub(1));
        for (i, t) in truth.iter_mut().enumerate().take(last + 1).skip(e.start_min as usize) {
            let rate = e.rate_at((i - e.start_min as usize) as f64);
            if rate <= 0.0 {
                continue;
            }
            let l_db = total_attenuation_db(rate, g);
            let wet = snr_wet(c, p, db_to_linear(l_db))?;
            trace.rain_drop[i] = linear_to_db(dry / wet);
            t.rate_mm_per_h = rate;
            t.l_rain_db = l_db;
        }
    }
    Ok(truth)
}

/// Sun-transit notches and gain steps for one station.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImpairmentSchedule {
    pub sun_transits: Vec<SunTransitSpec>,
    /// `(minute offset, delta dB)`.
    pub gain_steps: Vec<(u32, f64)>,
}

pub fn apply_impairments(trace: &mut SyntheticTrace, sched: &ImpairmentSchedule) {
    let n = trace.len();
    for st in &sched.sun_transits {
        let d = st.duration_min as f64;
        let start = st.start_min as usize;
        for i in start..(start + st.duration_min as usize + 1).min(n) {
            let x = (i - start) as f64 / d;
            trace.impairment[i] -= st.depth_db * (1.0 - (2.0 * x - 1.0).abs()).max(0.0);
        }
    }
    for &(at, delta) in &sched.gain_steps {
        for v in trace.impairment.iter_mut().skip(at as usize) {
            *v += delta;
        }
    }
}

/// Truth-side event boundaries used to score detection timing: the first
/// sample where the rain-induced SNR drop reaches `start_db` and the first
/// later sample where it is back to `end_db` or less.
pub fn truth_boundaries(
    trace: &SyntheticTrace,
    event: &RainEventSpec,
    start_db: f64,
    end_db: f64,
) -> Option<(i64, i64)> {
    let lo = event.start_min as usize;
    let hi = (event.end_min() as usize + 1).min(trace.len());
    let onset = (lo..hi).find(|&i| trace.rain_drop[i] >= start_db)?;
    let offset = (onset + 1..trace.len()).find(|&i| trace.rain_drop[i] <= end_db)?;
    Some((trace.start_k + onset as i64, trace.start_k + offset as i64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> RainPathGeometry {
        RainPathGeometry::ku_band(40.0, 3.0, 0.5).unwrap()
    }

    fn week(model: &DrySignalModel, seed: u64) -> SyntheticTrace {
        gen_dry(model, 0, 7 * SAMPLES_PER_DAY, &mut station_rng(seed, 0)).unwrap()
    }

    fn mean_std(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        (m, v.sqrt())
    }

    #[test]
    fn noiseless_flat_model_is_constant() {
        let model = DrySignalModel {
            diurnal_amplitude: 0.0,
            scint_std: 0.0,
            ..Default::default()
        };
        let s = week(&model, 1).samples();
        assert!(s.iter().all(|&x| x == quantize(10.428, 0.1)));
    }

    #[test]
    fn dry_statistics() {
        let (m, _) = mean_std(&week(&DrySignalModel::default(), 3).samples());
        assert!((m - 10.428).abs() < 0.01, "mean {m}");
        let flat = DrySignalModel {
            diurnal_amplitude: 0.0,
            ..Default::default()
        };
        let (_, s) = mean_std(&week(&flat, 4).samples());
        assert!((s - 0.139).abs() < 0.01, "std {s}");
    }

    #[test]
    fn samples_are_on_the_resolution_grid() {
        for x in week(&DrySignalModel::default(), 5).samples() {
            assert!(((x * 10.0).round() - x * 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn periodogram_peaks_at_one_day() {
        let s = week(&DrySignalModel::default(), 6).samples();
        let n = s.len();
        let (m, _) = mean_std(&s);
        let power = |bin: usize| {
            let w = 2.0 * std::f64::consts::PI * bin as f64 / n as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, x) in s.iter().enumerate() {
                re += (x - m) * (w * i as f64).cos();
                im += (x - m) * (w * i as f64).sin();
            }
            re * re + im * im
        };
        let best = (1..n / 2)
            .step_by(1)
            .max_by(|&a, &b| power(a).total_cmp(&power(b)))
            .unwrap();
        assert!((6..=8).contains(&best), "peak bin {best}");
    }

    #[test]
    fn same_seed_same_stream_different_station_different_stream() {
        let m = DrySignalModel::default();
        let a = gen_dry(&m, 0, 100, &mut station_rng(9, 0)).unwrap();
        let b = gen_dry(&m, 0, 100, &mut station_rng(9, 0)).unwrap();
        let c = gen_dry(&m, 0, 100, &mut station_rng(9, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.noise, c.noise);
    }

    #[test]
    fn zero_rate_scenario_leaves_trace_unchanged() {
        let mut t = week(&DrySignalModel::default(), 7);
        let before = t.clone();
        let ev = RainEventSpec {
            start_min: 100,
            duration_min: 60,
            shape: RainShape::Trapezoid,
            peak_rate: 0.0,
            station: None,
        };
        let truth = inject_rain(&mut t, &[&ev], &geometry(), &LinkNoiseParams::reference(), &CarrierParams::reference()).unwrap();
        assert_eq!(t, before);
        assert!(truth.iter().all(|s| s.rate_mm_per_h == 0.0));
    }

    #[test]
    fn deepest_sample_is_at_the_peak() {
        let model = DrySignalModel {
            diurnal_amplitude: 0.0,
            scint_std: 0.0,
            ..Default::default()
        };
        let mut t = week(&model, 8);
        let ev = RainEventSpec {
            start_min: 1000,
            duration_min: 41,
            shape: RainShape::Trapezoid,
            peak_rate: 20.0,
            station: None,
        };
        let truth = inject_rain(&mut t, &[&ev], &geometry(), &LinkNoiseParams::reference(), &CarrierParams::reference()).unwrap();
        let argmin = (0..t.len()).min_by(|&a, &b| t.clean(a).total_cmp(&t.clean(b))).unwrap();
        let peak = truth
            .iter()
            .position(|s| s.rate_mm_per_h == 20.0)
            .unwrap();
        assert!(argmin.abs_diff(peak) <= 1);
        assert!((1000 + 10..=1000 + 31).contains(&argmin));
    }

    #[test]
    fn truth_integral_matches_analytic_area() {
        for shape in [RainShape::Trapezoid, RainShape::DoublePeak] {
            for (dur, peak) in [(60, 50.0), (90, 20.0), (120, 5.0), (37, 11.0)] {
                let mut t = week(&DrySignalModel::default(), 10);
                let ev = RainEventSpec {
                    start_min: 500,
                    duration_min: dur,
                    shape,
                    peak_rate: peak,
                    station: None,
                };
                let truth = inject_rain(&mut t, &[&ev], &geometry(), &LinkNoiseParams::reference(), &CarrierParams::reference()).unwrap();
                let area: f64 = truth
                    .windows(2)
                    .map(|w| 0.5 * (w[0].rate_mm_per_h + w[1].rate_mm_per_h) / 60.0)
                    .sum();
                let exact = ev.analytic_total_mm();
                assert!((area / exact - 1.0).abs() < 0.005, "{shape:?} {dur} {area} {exact}");
            }
        }
    }

    #[test]
    fn injected_drop_inverts_back_to_attenuation() {
        let mut t = week(&DrySignalModel::default(), 11);
        let ev = RainEventSpec {
            start_min: 200,
            duration_min: 60,
            shape: RainShape::Trapezoid,
            peak_rate: 30.0,
            station: None,
        };
        let p = LinkNoiseParams::reference();
        let truth = inject_rain(&mut t, &[&ev], &geometry(), &p, &CarrierParams::reference()).unwrap();
        let xi = crate::link_budget::compute_xi(&p).unwrap();
        for (i, s) in truth.iter().enumerate().filter(|(_, s)| s.rate_mm_per_h > 0.0) {
            let ratio = db_to_linear(t.rain_drop[i]);
            let l = crate::link_budget::extract_rain_attenuation(ratio, 1.0, xi).unwrap();
            assert!((linear_to_db(l) - s.l_rain_db).abs() < 1e-9);
        }
    }

    #[test]
    fn impairments() {
        let model = DrySignalModel {
            diurnal_amplitude: 0.0,
            scint_std: 0.0,
            ..Default::default()
        };
        let mut t = week(&model, 12);
        let base = t.clone();
        apply_impairments(&mut t, &ImpairmentSchedule::default());
        assert_eq!(t, base);

        apply_impairments(
            &mut t,
            &ImpairmentSchedule {
                sun_transits: vec![SunTransitSpec {
                    start_min: 100,
                    duration_min: 8,
                    depth_db: 6.0,
                }],
                gain_steps: vec![(5000, -1.0)],
            },
        );
        assert_eq!(t.impairment[99], 0.0);
        assert_eq!(t.impairment[104], -6.0);
        assert_eq!(t.impairment[102], -3.0);
        assert_eq!(t.impairment[108], 0.0);
        assert!(t.impairment[5000..].iter().all(|&x| x == -1.0));
        assert!(t.impairment[4000..5000].iter().all(|&x| x == 0.0));
        let s = t.samples();
        assert!((s[5001] - (quantize(10.428 - 1.0, 0.1))).abs() < 1e-12);
    }

    #[test]
    fn scenario_validation() {
        let mut s = RainScenario::standard();
        assert!(s.validate().is_ok());
        s.events[1].start_min = s.events[0].start_min + 10;
        assert!(s.validate().is_err());
        let mut s = RainScenario::standard();
        s.events[0].peak_rate = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scenario_toml() {
        let s = RainScenario::parse_toml(
            r#"
duration_min = 3000
[[event]]
start_min = 100
duration_min = 60
shape = "double-peak"
peak_rate = 12.0
station = "A"

[[gain_step]]
at_min = 2000
delta_db = -1.0
"#,
        )
        .unwrap();
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events_for("A").len(), 1);
        assert!(s.events_for("B").is_empty());
        assert_eq!(s.gain_steps[0].station, None);
    }
}
