//! Multi-station engine.
//!
//! Samples are processed in epochs (one grid minute across all stations).
//! Within an epoch the order is fixed:
//!
//! 1. per station: sun-transit masking, slow tracker step, fast tracker step;
//! 2. across stations: the global fade check, and re-baselining if needed;
//! 3. per station: detector step and rate estimation.
//!
//! Stations that do not report in an epoch are left alone; their trackers
//! are advanced with prediction-only steps when they report again. The
//! whole mutable state serializes to JSON, and a restored engine continues
//! bit-identically.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::detector::{Boundary, DetectorState, RateOutcome};
use crate::pipeline::fade::{classify, dropped_within_window, FadeClass};
use crate::pipeline::forecast::IsothermForecast;
use crate::pipeline::ingest::{parse_record, Diagnostics, OrderGuard, Rejection, SnrSample};
use crate::pipeline::output::{EventRecord, OutputRecord, Quality};
use crate::pipeline::registry::{validate_stations, StationRecord};
use crate::pipeline::transit::TransitSchedule;
use crate::rain_model::RainPathGeometry;
use crate::time::{self, from_minute_index, minute_index, Timestamp};
use crate::trackers::TrackerState;
use crate::units::linear_to_db;
use crate::{Error, Result};

/// Gaps longer than this restart a station from scratch, samples.
pub const GAP_RESET_SAMPLES: i64 = 1440;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
struct StationState {
    st: Option<TrackerState>,
    ft: Option<TrackerState>,
    /// Recent slow-tracker states, so the tracker can be frozen at the
    /// state it had when an event's first above-threshold sample arrived.
    st_history: VecDeque<(i64, TrackerState)>,
    detector: DetectorState,
    last_k: Option<i64>,
    eps_recent: VecDeque<f64>,
    /// Level fed to the trackers while a sun transit is masked.
    held_level: Option<f64>,
    event_h0: Option<f64>,
    event_quality: Option<Quality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GlobalHold {
    until_k: i64,
    step_db: f64,
    rebaselined: BTreeSet<usize>,
}

/// Everything that changes while the engine runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineState {
    station_ids: Vec<String>,
    stations: Vec<StationState>,
    last_epoch: Option<i64>,
    hold: Option<GlobalHold>,
    diagnostics: Diagnostics,
    guard: OrderGuard,
    pending_epoch: Option<i64>,
    pending: Vec<(usize, f64)>,
}

/// Records and closed events produced so far.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineOutput {
    pub records: Vec<OutputRecord>,
    pub events: Vec<EventRecord>,
}

impl EngineOutput {
    pub fn append(&mut self, mut other: EngineOutput) {
        self.records.append(&mut other.records);
        self.events.append(&mut other.events);
    }
}

struct EventGeometry {
    geometry: Option<RainPathGeometry>,
    h0: Option<f64>,
    quality: Quality,
}

#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    xi: f64,
    stations: Vec<StationRecord>,
    index: HashMap<String, usize>,
    forecast: Option<IsothermForecast>,
    transits: TransitSchedule,
    state: EngineState,
}

impl Engine {
    pub fn new(
        cfg: EngineConfig,
        stations: Vec<StationRecord>,
        forecast: Option<IsothermForecast>,
        transits: TransitSchedule,
    ) -> Result<Self> {
        cfg.validate()?;
        validate_stations(&stations)?;
        let xi = cfg.xi()?;
        let index = stations
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        let state = EngineState {
            station_ids: stations.iter().map(|s| s.id.clone()).collect(),
            stations: vec![StationState::default(); stations.len()],
            ..Default::default()
        };
        Ok(Self {
            cfg,
            xi,
            stations,
            index,
            forecast,
            transits,
            state,
        })
    }

    /// Rebuilds an engine from a checkpoint taken with the same registry.
    pub fn restore(
        cfg: EngineConfig,
        stations: Vec<StationRecord>,
        forecast: Option<IsothermForecast>,
        transits: TransitSchedule,
        checkpoint: &str,
    ) -> Result<Self> {
        let mut engine = Self::new(cfg, stations, forecast, transits)?;
        let state: EngineState = serde_json::from_str(checkpoint)?;
        if state.station_ids != engine.state.station_ids {
            return Err(Error::invalid(
                "checkpoint",
                "station list differs from the registry",
            ));
        }
        engine.state = state;
        Ok(engine)
    }

    pub fn checkpoint(&self) -> String {
        serde_json::to_string(&self.state).expect("engine state serializes")
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn stations(&self) -> &[StationRecord] {
        &self.stations
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.state.diagnostics
    }

    pub fn is_raining(&self, station: usize) -> bool {
        self.state.stations[station].detector.is_raining()
    }

    /// Current `(slow, fast)` tracker levels of a station.
    pub fn tracker_levels(&self, station: usize) -> Option<(f64, f64)> {
        let s = &self.state.stations[station];
        Some((s.st?.level, s.ft?.level))
    }

    /// Feeds one raw telemetry line. Invalid lines are counted, not fatal.
    pub fn push_line(&mut self, line: &str, out: &mut EngineOutput) -> Result<()> {
        if line.trim().is_empty() {
            return Ok(());
        }
        match parse_record(line) {
            Ok((station, t, z)) => self.push(&station, t, z, out),
            Err(e) => {
                self.state
                    .diagnostics
                    .reject(Rejection::Malformed, || format!("malformed record: {e}"));
                Ok(())
            }
        }
    }

    /// Feeds one measurement. Records must arrive in non-decreasing minute
    /// order overall; a record older than the epoch being collected is
    /// rejected as out of order. Completed epochs are processed and their
    /// output appended to `out`.
    pub fn push(&mut self, station_id: &str, t: Timestamp, esn0_db: f64, out: &mut EngineOutput) -> Result<()> {
        let Some(idx) = self.station_index(station_id) else {
            self.state.diagnostics.reject(Rejection::UnknownStation, || {
                format!("unknown station `{station_id}`")
            });
            return Ok(());
        };
        if !esn0_db.is_finite() {
            self.state.diagnostics.reject(Rejection::Malformed, || {
                format!("{station_id}: non-finite esn0_db")
            });
            return Ok(());
        }
        let k = minute_index(t);
        let floor = self.state.pending_epoch.or(self.state.last_epoch);
        let late = match (self.state.pending_epoch, self.state.last_epoch) {
            (Some(p), _) => k < p,
            (None, Some(l)) => k <= l,
            _ => false,
        };
        if late {
            let r = match self.state.guard.check(station_id, k) {
                Err(Rejection::Duplicate) => Rejection::Duplicate,
                _ => Rejection::OutOfOrder,
            };
            self.state.diagnostics.reject(r, || {
                format!(
                    "{station_id}: record at {} arrived after {}",
                    time::format(t),
                    floor.map(|f| time::format(from_minute_index(f))).unwrap_or_default()
                )
            });
            return Ok(());
        }
        if let Err(r) = self.state.guard.check(station_id, k) {
            self.state.diagnostics.reject(r, || {
                format!("{station_id}: {r:?} record at {}", time::format(t))
            });
            return Ok(());
        }
        if let Some(p) = self.state.pending_epoch {
            if k > p {
                self.flush(out)?;
            }
        }
        self.state.pending_epoch = Some(k);
        self.state.pending.push((idx, esn0_db));
        Ok(())
    }

    /// Processes the epoch being collected, if any.
    pub fn flush(&mut self, out: &mut EngineOutput) -> Result<()> {
        if let Some(k) = self.state.pending_epoch.take() {
            let samples = std::mem::take(&mut self.state.pending);
            self.process_epoch(k, &samples, out)?;
        }
        Ok(())
    }

    /// Runs pre-grouped per-station sequences (as returned by ingestion)
    /// through the engine in time order and flushes at the end.
    pub fn run_batch<'a>(
        &mut self,
        stations: impl IntoIterator<Item = (&'a str, &'a [SnrSample])>,
    ) -> Result<EngineOutput> {
        let mut merged: Vec<(i64, usize, f64)> = Vec::new();
        for (id, samples) in stations {
            let Some(idx) = self.station_index(id) else {
                self.state
                    .diagnostics
                    .reject(Rejection::UnknownStation, || format!("unknown station `{id}`"));
                continue;
            };
            merged.extend(samples.iter().map(|s| (s.k, idx, s.esn0_db)));
        }
        merged.sort_by_key(|&(k, idx, _)| (k, idx));
        let mut out = EngineOutput::default();
        for (k, idx, z) in merged {
            let id = self.stations[idx].id.clone();
            self.push(&id, from_minute_index(k), z, &mut out)?;
        }
        self.flush(&mut out)?;
        Ok(out)
    }

    /// Processes one epoch. `samples` holds `(station index, Es/N0 dB)`
    /// with at most one entry per station.
    pub fn process_epoch(&mut self, k: i64, samples: &[(usize, f64)], out: &mut EngineOutput) -> Result<()> {
        if self.state.last_epoch.is_some_and(|l| k <= l) {
            return Err(Error::invalid("epoch", format!("{k} is not after the previous epoch")));
        }
        let mut seen = BTreeSet::new();
        for &(idx, z) in samples {
            if idx >= self.stations.len() || !seen.insert(idx) {
                return Err(Error::invalid("epoch", "bad or repeated station index"));
            }
            if !z.is_finite() {
                return Err(Error::NonFinite("esn0_db"));
            }
        }
        self.state.last_epoch = Some(k);

        let mut masked = Vec::with_capacity(samples.len());
        for &(idx, z) in samples {
            masked.push(self.track(idx, k, z)?);
        }

        let hold_active = self.global_fade_check(k, samples);

        for (&(idx, _), &is_masked) in samples.iter().zip(&masked) {
            self.detect(idx, k, is_masked, hold_active, out)?;
        }
        Ok(())
    }

    /// Masking and both tracker updates. Returns whether the sample is masked.
    fn track(&mut self, idx: usize, k: i64, z: f64) -> Result<bool> {
        let cfg = self.cfg;
        let masked = cfg.sun_transit_masking && self.transits.is_masked(&self.stations[idx].id, k);
        let s = &mut self.state.stations[idx];

        if let Some(last) = s.last_k {
            let gap = k - last - 1;
            if gap > GAP_RESET_SAMPLES {
                let id = &self.stations[idx].id;
                self.state
                    .diagnostics
                    .note(|| format!("{id}: {gap}-sample gap, station restarted"));
                *s = StationState::default();
            } else {
                for _ in 0..gap {
                    s.st = s.st.map(|t| t.predict_only(&cfg.slow));
                    s.ft = s.ft.map(|t| t.predict_only(&cfg.fast));
                }
            }
        }
        s.last_k = Some(k);

        let (st, ft) = match (s.st, s.ft) {
            (Some(st), Some(ft)) => (st, ft),
            _ => (
                TrackerState::init(z, &cfg.slow)?,
                TrackerState::init(z, &cfg.fast)?,
            ),
        };
        let z_eff = if masked {
            *s.held_level.get_or_insert(ft.level)
        } else {
            s.held_level = None;
            z
        };
        let st = st.step(z_eff, &cfg.slow)?;
        let ft = ft.step(z_eff, &cfg.fast)?;
        s.st = Some(st);
        s.ft = Some(ft);
        s.st_history.push_back((k, st));
        while s.st_history.len() > cfg.detector.min_event_samples as usize {
            s.st_history.pop_front();
        }
        s.eps_recent.push_back(st.level - ft.level);
        while s.eps_recent.len() > cfg.fade.window as usize + 1 {
            s.eps_recent.pop_front();
        }
        Ok(masked)
    }

    /// Evaluates the cross-station policy for epoch `k`; returns whether a
    /// global hold is active (event starts suppressed).
    fn global_fade_check(&mut self, k: i64, samples: &[(usize, f64)]) -> bool {
        if self.state.hold.as_ref().is_some_and(|h| k > h.until_k) {
            self.state.hold = None;
        }
        let policy = self.cfg.fade;
        let dropped: Vec<(usize, f64)> = samples
            .iter()
            .filter(|&&(idx, _)| {
                let eps: Vec<f64> = self.state.stations[idx].eps_recent.iter().copied().collect();
                dropped_within_window(&eps, &policy)
            })
            .map(|&(idx, z)| {
                let st = self.state.stations[idx].st.expect("tracked this epoch");
                (idx, z - st.level)
            })
            .collect();

        if self.state.hold.is_none() && classify(dropped.len(), samples.len(), &policy) == FadeClass::Global {
            let mut steps: Vec<f64> = dropped.iter().map(|&(_, d)| d).collect();
            steps.sort_by(f64::total_cmp);
            let n = steps.len();
            let step_db = if n % 2 == 1 {
                steps[n / 2]
            } else {
                0.5 * (steps[n / 2 - 1] + steps[n / 2])
            };
            self.state.diagnostics.global_fades += 1;
            self.state.diagnostics.note(|| {
                format!(
                    "global fade at {}: {} of {} stations, step {step_db:.3} dB",
                    time::format(from_minute_index(k)),
                    n,
                    samples.len()
                )
            });
            self.state.hold = Some(GlobalHold {
                until_k: k + policy.window as i64,
                step_db,
                rebaselined: BTreeSet::new(),
            });
        }

        let Some(hold) = self.state.hold.as_mut() else {
            return false;
        };
        let step = hold.step_db;
        for &(idx, _) in samples {
            if hold.rebaselined.insert(idx) {
                let s = &mut self.state.stations[idx];
                rebaseline(s, step);
            }
        }
        true
    }

    fn detect(&mut self, idx: usize, k: i64, masked: bool, hold: bool, out: &mut EngineOutput) -> Result<()> {
        let cfg = self.cfg;
        let station_id = self.stations[idx].id.clone();
        let (st, ft) = {
            let s = &self.state.stations[idx];
            (s.st.expect("tracked"), s.ft.expect("tracked"))
        };
        let mut record = OutputRecord {
            station_id: station_id.clone(),
            k,
            epsilon_db: st.level - ft.level,
            rain_flag: self.state.stations[idx].detector.is_raining(),
            l_rain_db: None,
            rate_mm_per_h: None,
            quality: if hold { Quality::Global } else { Quality::Ok },
        };
        if masked {
            self.state.stations[idx].detector.clear_pending();
            record.quality = Quality::Masked;
            out.records.push(record);
            return Ok(());
        }

        let s = &self.state.stations[idx];
        let may_start = !hold
            && !s.detector.is_raining()
            && st.level - ft.level >= cfg.detector.start_threshold
            && s.detector.consecutive_above + 1 >= cfg.detector.min_event_samples;
        let event_geometry = if may_start { Some(self.event_geometry(idx, k)) } else { None };

        let s = &mut self.state.stations[idx];
        let step = s.detector.step(
            k,
            st.level,
            ft.level,
            event_geometry.as_ref().and_then(|g| g.geometry.as_ref()),
            self.xi,
            &cfg.detector,
            !hold,
        )?;
        record.epsilon_db = step.epsilon_db;

        match step.boundary {
            Some(Boundary::Start { onset_k, .. }) => {
                let at_onset = s
                    .st_history
                    .iter()
                    .find(|(hk, _)| *hk == onset_k)
                    .map(|&(_, t)| t)
                    .unwrap_or(st);
                s.st = Some(at_onset.freeze());
                let g = event_geometry.expect("start implies geometry lookup");
                s.event_h0 = g.h0;
                s.event_quality = Some(g.quality);
            }
            Some(Boundary::End(ev)) => {
                s.st = s.st.map(|t| t.unfreeze());
                out.events.push(EventRecord {
                    station_id: station_id.clone(),
                    onset_k: ev.onset_k,
                    end_k: ev.end_k,
                    dry_ref_db: ev.dry_ref_db,
                    h0_km: s.event_h0.take(),
                    peak_rate_mm_per_h: ev.peak_rate,
                    cumulative_mm: ev.cumulative_mm,
                    rate_samples: ev.samples.len() as u32,
                    invalid_samples: ev.invalid_samples,
                    quality: s.event_quality.take().unwrap_or(Quality::Ok),
                });
            }
            None => {}
        }

        record.rain_flag = s.detector.is_raining();
        match step.rate {
            Some(RateOutcome::Valid(r)) => {
                record.l_rain_db = Some(linear_to_db(r.l_rain_linear));
                record.rate_mm_per_h = Some(r.rate_mm_per_h);
                if record.quality == Quality::Ok {
                    record.quality = s.event_quality.unwrap_or(Quality::Ok);
                }
            }
            Some(RateOutcome::Invalid { reason, .. }) => {
                record.quality = Quality::Invalid;
                self.state.diagnostics.invalid_rate += 1;
                let id = &station_id;
                self.state.diagnostics.note(|| {
                    format!("{id} at {}: {reason}", time::format(from_minute_index(k)))
                });
            }
            None => {}
        }
        out.records.push(record);
        Ok(())
    }

    /// Isotherm height and slant-path geometry for an event starting at `k`.
    fn event_geometry(&mut self, idx: usize, k: i64) -> EventGeometry {
        let station = &self.stations[idx];
        let t = from_minute_index(k);
        let fallback = station.default_isotherm_km;
        let (h0, quality) = match self
            .forecast
            .as_ref()
            .map(|f| f.lookup_h0(t, self.cfg.forecast_max_age_h))
        {
            Some(Ok(h)) => (Some(h), Quality::Ok),
            Some(Err(Error::StaleForecast { value_km, .. })) => {
                self.state.diagnostics.stale_forecast += 1;
                (Some(value_km), Quality::Degraded)
            }
            _ => {
                if fallback.is_none() {
                    self.state.diagnostics.missing_forecast += 1;
                }
                (fallback, Quality::Degraded)
            }
        };
        let Some(h0) = h0 else {
            return EventGeometry {
                geometry: None,
                h0: None,
                quality: Quality::Invalid,
            };
        };
        let delta = station.melting_thickness_km.unwrap_or(self.cfg.melting_thickness_km);
        match RainPathGeometry::new(station.elevation_deg, h0, delta, self.cfg.ml_coeffs, self.cfg.ll_coeffs) {
            Ok(g) => EventGeometry {
                geometry: Some(g),
                h0: Some(h0),
                quality,
            },
            Err(e) => {
                let id = &station.id;
                self.state.diagnostics.note(|| format!("{id}: no usable geometry: {e}"));
                EventGeometry {
                    geometry: None,
                    h0: Some(h0),
                    quality: Quality::Invalid,
                }
            }
        }
    }
}

/// Moves a station onto a new signal level after a global gain step.
///
/// Dry stations get the slow tracker shifted by the step and the fast
/// tracker set equal to it. A raining station keeps its fast tracker (it
/// follows the rain) while its frozen slow tracker and the event's dry
/// reference are shifted.
fn rebaseline(s: &mut StationState, step: f64) {
    let Some(st) = s.st else { return };
    let st = st.shifted(step);
    s.st = Some(st);
    s.st_history.clear();
    if s.detector.is_raining() {
        s.detector.rebaseline(step);
    } else if let Some(ft) = s.ft {
        s.ft = Some(TrackerState {
            level: st.level,
            drift: st.drift,
            ..ft
        });
    }
    s.detector.clear_pending();
    s.eps_recent.clear();
    if let (Some(st), Some(ft)) = (s.st, s.ft) {
        s.eps_recent.push_back(st.level - ft.level);
    }
    s.held_level = s.held_level.map(|h| h + step);
}
