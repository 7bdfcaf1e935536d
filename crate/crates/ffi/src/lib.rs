//! C ABI over the satrain engine.
//!
//! Every function returns a [`SatrainStatus`]; results go through out
//! pointers. On failure a message is kept per thread and can be read with
//! [`satrain_last_error_message`]. Engines are opaque handles created by
//! `satrain_engine_new` / `satrain_engine_restore` and released with
//! `satrain_engine_free`. Strings handed out by the library are released
//! with `satrain_string_free`.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use satrain::config::EngineConfig;
use satrain::detector;
use satrain::link_budget::{self, LinkNoiseParams};
use satrain::pipeline::registry::parse_registry;
use satrain::pipeline::{
    Engine, EngineOutput, EventRecord, IsothermForecast, OutputRecord, Quality, TransitSchedule,
};
use satrain::rain_model::{self, RainPathGeometry};
use satrain::time;
use satrain::validation;
use satrain::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatrainStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    ParseError = 4,
    ConfigError = 5,
    /// Nothing left to pop.
    Empty = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatrainQuality {
    Ok = 0,
    Degraded = 1,
    Masked = 2,
    Invalid = 3,
    Global = 4,
}

impl From<Quality> for SatrainQuality {
    fn from(q: Quality) -> Self {
        match q {
            Quality::Ok => SatrainQuality::Ok,
            Quality::Degraded => SatrainQuality::Degraded,
            Quality::Masked => SatrainQuality::Masked,
            Quality::Invalid => SatrainQuality::Invalid,
            Quality::Global => SatrainQuality::Global,
        }
    }
}

/// Link noise parameters; losses in dB, temperatures in K.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SatrainLinkParams {
    pub atm_loss_db: f64,
    pub cloud_loss_db: f64,
    pub t_cosmos: f64,
    pub t_meteo: f64,
    pub t_ground: f64,
    pub t_receiver: f64,
}

/// Slant-path geometry with Ku-band power-law coefficients.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SatrainGeometry {
    pub elevation_deg: f64,
    pub isotherm_height_km: f64,
    pub melting_thickness_km: f64,
}

/// One per-sample estimate. Absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SatrainRecord {
    /// Index into the engine's station registry.
    pub station_index: u32,
    /// Start of the sample's minute, Unix seconds.
    pub timestamp: i64,
    pub epsilon_db: f64,
    pub rain_flag: bool,
    pub l_rain_db: f64,
    pub rate_mm_per_h: f64,
    pub quality: SatrainQuality,
}

/// One closed rain event. Absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SatrainEvent {
    pub station_index: u32,
    pub onset: i64,
    pub end: i64,
    pub dry_ref_db: f64,
    pub h0_km: f64,
    pub peak_rate_mm_per_h: f64,
    pub cumulative_mm: f64,
    pub rate_samples: u32,
    pub invalid_samples: u32,
    pub quality: SatrainQuality,
}

/// Opaque engine handle.
pub struct SatrainEngine {
    engine: Engine,
    records: VecDeque<OutputRecord>,
    events: VecDeque<EventRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SatrainStatus {
    match e {
        Error::InvalidParameter { .. } | Error::NonFinite(_) | Error::MalformedMeasurement(_) => {
            SatrainStatus::InvalidArgument
        }
        Error::OutOfRange(_) | Error::NoForecast(_) | Error::StaleForecast { .. } => {
            SatrainStatus::OutOfRange
        }
        Error::Config { .. } => SatrainStatus::ConfigError,
        Error::DisjointCoverage => SatrainStatus::InvalidArgument,
        Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Toml(_) => {
            SatrainStatus::ParseError
        }
    }
}

fn fail(e: Error) -> SatrainStatus {
    set_error(&e.to_string());
    status_of(&e)
}

/// Runs `f`, turning panics into `Panic` and recording error messages.
fn guard(f: impl FnOnce() -> Result<(), SatrainStatus>) -> SatrainStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SatrainStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SatrainStatus::Panic
        }
    }
}

fn null(what: &str) -> SatrainStatus {
    set_error(&format!("`{what}` is NULL"));
    SatrainStatus::NullPointer
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, SatrainStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| {
        set_error(&format!("`{what}` is not valid UTF-8"));
        SatrainStatus::InvalidArgument
    })
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, SatrainStatus> {
    opt_str(p, what)?.ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SatrainStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

fn geometry(g: &SatrainGeometry) -> Result<RainPathGeometry, SatrainStatus> {
    RainPathGeometry::ku_band(g.elevation_deg, g.isotherm_height_km, g.melting_thickness_km)
        .map_err(fail)
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn satrain_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Noise-coupling constant ξ of a link.
///
/// # Safety
/// `params` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn satrain_compute_xi(params: *const SatrainLinkParams, out: *mut f64) -> SatrainStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_ref(out, "out")?;
        let link = LinkNoiseParams::from_db(
            p.atm_loss_db,
            p.cloud_loss_db,
            p.t_cosmos,
            p.t_meteo,
            p.t_ground,
            p.t_receiver,
        );
        *out = link_budget::compute_xi(&link).map_err(fail)?;
        Ok(())
    })
}

/// Slant-path rain attenuation (dB) for a ground rain rate (mm/h).
///
/// # Safety
/// `g` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn satrain_total_attenuation_db(
    g: *const SatrainGeometry,
    rate_mm_per_h: f64,
    out: *mut f64,
) -> SatrainStatus {
    guard(|| {
        let g = geometry(g.as_ref().ok_or_else(|| null("g"))?)?;
        let out = out_ref(out, "out")?;
        if !(rate_mm_per_h.is_finite() && rate_mm_per_h >= 0.0) {
            set_error("rate must be finite and >= 0");
            return Err(SatrainStatus::InvalidArgument);
        }
        *out = rain_model::total_attenuation_db(rate_mm_per_h, &g);
        Ok(())
    })
}

/// Ground rain rate (mm/h) producing the given attenuation (dB).
///
/// # Safety
/// `g` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn satrain_invert_to_rain_rate(
    g: *const SatrainGeometry,
    l_rain_db: f64,
    out: *mut f64,
) -> SatrainStatus {
    guard(|| {
        let g = geometry(g.as_ref().ok_or_else(|| null("g"))?)?;
        let out = out_ref(out, "out")?;
        *out = rain_model::invert_to_rain_rate(l_rain_db, &g).map_err(fail)?;
        Ok(())
    })
}

/// Linear rain attenuation and rain rate from a frozen dry reference and
/// the fast tracker level, both dB.
///
/// # Safety
/// `g`, `l_rain_linear` and `rate_mm_per_h` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn satrain_estimate_rate(
    dry_ref_db: f64,
    eta_ft_db: f64,
    xi: f64,
    g: *const SatrainGeometry,
    l_rain_linear: *mut f64,
    rate_mm_per_h: *mut f64,
) -> SatrainStatus {
    guard(|| {
        let g = geometry(g.as_ref().ok_or_else(|| null("g"))?)?;
        let l_out = out_ref(l_rain_linear, "l_rain_linear")?;
        let r_out = out_ref(rate_mm_per_h, "rate_mm_per_h")?;
        let (l, r) = detector::estimate_rate(dry_ref_db, eta_ft_db, xi, &g).map_err(fail)?;
        *l_out = l;
        *r_out = r;
        Ok(())
    })
}

/// Horizontal length of the wet slant path, km.
///
/// # Safety
/// `out` must be a valid pointer or NULL.
#[no_mangle]
pub unsafe extern "C" fn satrain_ground_footprint(h0_km: f64, elevation_rad: f64, out: *mut f64) -> SatrainStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = validation::ground_footprint(h0_km, elevation_rad).map_err(fail)?;
        Ok(())
    })
}

/// Gaussian probability that ε exceeds `threshold`.
///
/// # Safety
/// `out` must be a valid pointer or NULL.
#[no_mangle]
pub unsafe extern "C" fn satrain_false_alarm_probability(
    eps_mean: f64,
    eps_std: f64,
    threshold: f64,
    out: *mut f64,
) -> SatrainStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = detector::false_alarm_probability(eps_mean, eps_std, threshold).map_err(fail)?;
        Ok(())
    })
}

struct EngineInputs {
    cfg: EngineConfig,
    stations: Vec<satrain::pipeline::StationRecord>,
    forecast: Option<IsothermForecast>,
    transits: TransitSchedule,
}

unsafe fn engine_inputs(
    config: *const c_char,
    registry: *const c_char,
    forecast: *const c_char,
    transits: *const c_char,
) -> Result<EngineInputs, SatrainStatus> {
    let cfg = match opt_str(config, "config")? {
        Some(t) => EngineConfig::parse(t).map_err(fail)?,
        None => EngineConfig::default(),
    };
    let stations = parse_registry(req_str(registry, "registry")?).map_err(fail)?;
    let forecast = match opt_str(forecast, "forecast")? {
        Some(t) => Some(IsothermForecast::parse_csv(t).map_err(fail)?),
        None => None,
    };
    let transits = match opt_str(transits, "transits")? {
        Some(t) => TransitSchedule::parse_csv(t).map_err(fail)?,
        None => TransitSchedule::default(),
    };
    Ok(EngineInputs {
        cfg,
        stations,
        forecast,
        transits,
    })
}

fn boxed(engine: Engine) -> *mut SatrainEngine {
    Box::into_raw(Box::new(SatrainEngine {
        engine,
        records: VecDeque::new(),
        events: VecDeque::new(),
    }))
}

/// Creates an engine.
///
/// `config` is key = value text (NULL for defaults), `registry` the station
/// TOML, `forecast` and `transits` CSV text or NULL.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_new(
    config: *const c_char,
    registry: *const c_char,
    forecast: *const c_char,
    transits: *const c_char,
    out: *mut *mut SatrainEngine,
) -> SatrainStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let i = engine_inputs(config, registry, forecast, transits)?;
        let e = Engine::new(i.cfg, i.stations, i.forecast, i.transits).map_err(fail)?;
        *out = boxed(e);
        Ok(())
    })
}

/// Creates an engine from a state written by `satrain_engine_checkpoint`.
/// The other inputs must match the ones the checkpointed engine used.
///
/// # Safety
/// As for `satrain_engine_new`; `checkpoint` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_restore(
    config: *const c_char,
    registry: *const c_char,
    forecast: *const c_char,
    transits: *const c_char,
    checkpoint: *const c_char,
    out: *mut *mut SatrainEngine,
) -> SatrainStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let i = engine_inputs(config, registry, forecast, transits)?;
        let cp = req_str(checkpoint, "checkpoint")?;
        let e = Engine::restore(i.cfg, i.stations, i.forecast, i.transits, cp).map_err(fail)?;
        *out = boxed(e);
        Ok(())
    })
}

/// Releases an engine. NULL is ignored.
///
/// # Safety
/// `engine` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_free(engine: *mut SatrainEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

fn collect(h: &mut SatrainEngine, out: EngineOutput) {
    h.records.extend(out.records);
    h.events.extend(out.events);
}

/// Feeds one measurement. Records must come in non-decreasing time order;
/// late, duplicate or unknown-station records are counted and dropped.
///
/// # Safety
/// `engine` must be a live handle; `station_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_push(
    engine: *mut SatrainEngine,
    station_id: *const c_char,
    unix_seconds: i64,
    esn0_db: f64,
) -> SatrainStatus {
    guard(|| {
        let h = out_ref(engine, "engine")?;
        let id = req_str(station_id, "station_id")?;
        let t = time::from_unix_seconds(unix_seconds).map_err(fail)?;
        let mut out = EngineOutput::default();
        h.engine.push(id, t, esn0_db, &mut out).map_err(fail)?;
        collect(h, out);
        Ok(())
    })
}

/// Feeds one JSON telemetry line. Malformed lines are counted and dropped.
///
/// # Safety
/// `engine` must be a live handle; `line` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_push_line(engine: *mut SatrainEngine, line: *const c_char) -> SatrainStatus {
    guard(|| {
        let h = out_ref(engine, "engine")?;
        let line = req_str(line, "line")?;
        let mut out = EngineOutput::default();
        h.engine.push_line(line, &mut out).map_err(fail)?;
        collect(h, out);
        Ok(())
    })
}

/// Processes the minute still being collected.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_flush(engine: *mut SatrainEngine) -> SatrainStatus {
    guard(|| {
        let h = out_ref(engine, "engine")?;
        let mut out = EngineOutput::default();
        h.engine.flush(&mut out).map_err(fail)?;
        collect(h, out);
        Ok(())
    })
}

fn station_index(h: &SatrainEngine, id: &str) -> u32 {
    h.engine.station_index(id).expect("output for a registered station") as u32
}

/// Takes the oldest pending estimate; `Empty` when there is none.
///
/// # Safety
/// `engine` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_pop_record(engine: *mut SatrainEngine, out: *mut SatrainRecord) -> SatrainStatus {
    guard(|| {
        let h = out_ref(engine, "engine")?;
        let out = out_ref(out, "out")?;
        let r = h.records.pop_front().ok_or(SatrainStatus::Empty)?;
        *out = SatrainRecord {
            station_index: station_index(h, &r.station_id),
            timestamp: time::from_minute_index(r.k).timestamp(),
            epsilon_db: r.epsilon_db,
            rain_flag: r.rain_flag,
            l_rain_db: r.l_rain_db.unwrap_or(f64::NAN),
            rate_mm_per_h: r.rate_mm_per_h.unwrap_or(f64::NAN),
            quality: r.quality.into(),
        };
        Ok(())
    })
}

/// Takes the oldest closed event; `Empty` when there is none.
///
/// # Safety
/// `engine` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_pop_event(engine: *mut SatrainEngine, out: *mut SatrainEvent) -> SatrainStatus {
    guard(|| {
        let h = out_ref(engine, "engine")?;
        let out = out_ref(out, "out")?;
        let e = h.events.pop_front().ok_or(SatrainStatus::Empty)?;
        *out = SatrainEvent {
            station_index: station_index(h, &e.station_id),
            onset: time::from_minute_index(e.onset_k).timestamp(),
            end: time::from_minute_index(e.end_k).timestamp(),
            dry_ref_db: e.dry_ref_db,
            h0_km: e.h0_km.unwrap_or(f64::NAN),
            peak_rate_mm_per_h: e.peak_rate_mm_per_h,
            cumulative_mm: e.cumulative_mm,
            rate_samples: e.rate_samples,
            invalid_samples: e.invalid_samples,
            quality: e.quality.into(),
        };
        Ok(())
    })
}

/// Number of registered stations.
///
/// # Safety
/// `engine` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_station_count(engine: *const SatrainEngine, out: *mut u32) -> SatrainStatus {
    guard(|| {
        let h = engine.as_ref().ok_or_else(|| null("engine"))?;
        *out_ref(out, "out")? = h.engine.stations().len() as u32;
        Ok(())
    })
}

/// Copy of a station id; free with `satrain_string_free`.
///
/// # Safety
/// `engine` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_station_id(
    engine: *const SatrainEngine,
    index: u32,
    out: *mut *mut c_char,
) -> SatrainStatus {
    guard(|| {
        let h = engine.as_ref().ok_or_else(|| null("engine"))?;
        let out = out_ref(out, "out")?;
        let st = h.engine.stations().get(index as usize).ok_or_else(|| {
            set_error(&format!("station index {index} out of range"));
            SatrainStatus::OutOfRange
        })?;
        *out = CString::new(st.id.as_str()).expect("ids have no NUL").into_raw();
        Ok(())
    })
}

/// Serialized engine state (JSON); free with `satrain_string_free`.
/// Pending, not yet popped outputs are not part of the state.
///
/// # Safety
/// `engine` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn satrain_engine_checkpoint(engine: *const SatrainEngine, out: *mut *mut c_char) -> SatrainStatus {
    guard(|| {
        let h = engine.as_ref().ok_or_else(|| null("engine"))?;
        let out = out_ref(out, "out")?;
        *out = CString::new(h.engine.checkpoint()).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn satrain_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
