//! The `satrain` command line: `simulate`, `process`, `curve`, `compare`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::config::{EngineConfig, CONFIG_ENV_VAR};
use crate::pipeline::ingest::{format_record, ingest};
use crate::pipeline::output::{fmt_db, fmt_sig4, sort_events, sort_records, EVENTS_CSV_HEADER};
use crate::pipeline::registry::load_registry;
use crate::pipeline::{
    Engine, EngineOutput, EstimateLine, IsothermForecast, StationRecord, TransitSchedule,
};
use crate::rain_model::{characteristic_curve, RainPathGeometry};
use crate::synth::{
    apply_impairments, gen_dry, inject_rain, station_rng, ImpairmentSchedule, RainScenario,
    SunTransitSpec, TruthSample,
};
use crate::time::{self, Timestamp};
use crate::validation::{
    compare, estimates_to_minutes, ground_footprint, steps_to_minutes, tbrg_rate, MinuteSeries,
    TbrgLog,
};
use crate::Error;

/// Isotherm height used when neither a forecast nor the station sets one, km.
pub const DEFAULT_H0_KM: f64 = 3.0;
pub const DEFAULT_ELEVATION_DEG: f64 = 40.0;
pub const DEFAULT_START: &str = "2017-10-01T00:00:00Z";
pub const TRUTH_CSV_HEADER: &str = "station_id,timestamp,true_rate_mm_per_h,true_l_rain_db";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration files.
    Usage(String),
    /// Unreadable or unusable input data.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(ctx: &str) -> impl FnOnce(Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("{ctx}: {e}"))
}

fn data(ctx: &str) -> impl FnOnce(Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{ctx}: {e}"))
}

fn io_data(ctx: &str) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{ctx}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "satrain", version, about = "Rain detection and rain-rate estimation from satellite SNR telemetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic telemetry and its ground truth.
    Simulate(SimulateArgs),
    /// Run telemetry through the detection and estimation engine.
    Process(ProcessArgs),
    /// Print the SNR-drop to rain-rate table for several isotherm heights.
    Curve(CurveArgs),
    /// Compare estimates against synthetic truth, a gauge log or other estimates.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Engine configuration (key = value).
    #[arg(long, env = CONFIG_ENV_VAR)]
    pub config: Option<PathBuf>,
    /// Station registry (TOML). Defaults to one station `S01` at 40°.
    #[arg(long)]
    pub stations: Option<PathBuf>,
    /// Isotherm forecast CSV (`valid_time,h0_km`).
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// Sun-transit schedule CSV (`station_id,start,duration_s,depth_db`).
    #[arg(long = "transit-schedule")]
    pub transit_schedule: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Scenario TOML; the built-in week with three events otherwise.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// First timestamp of the run (RFC 3339).
    #[arg(long, default_value = DEFAULT_START)]
    pub start: String,
    /// Telemetry output (JSON lines); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth CSV output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Telemetry input (JSON lines); stdin if absent or `-`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Per-sample estimates (JSON lines); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event summary CSV.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Write the engine state here after the input is consumed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Start from a state written by `--checkpoint`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Ignore the sun-transit schedule.
    #[arg(long)]
    pub no_mask: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, env = CONFIG_ENV_VAR)]
    pub config: Option<PathBuf>,
    /// Isotherm heights, km.
    #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.5, 4.0])]
    pub h0: Vec<f64>,
    /// SNR drops, dB: a comma list or `start:step:end`. Empty for none.
    #[arg(long, default_value = "0.5:0.5:10")]
    pub grid: String,
    #[arg(long, default_value_t = DEFAULT_ELEVATION_DEG)]
    pub elevation: f64,
    /// Melting-layer thickness, km; the configured value otherwise.
    #[arg(long)]
    pub melting_thickness: Option<f64>,
    /// Table output (CSV); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Estimates written by `process`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Reference: ground truth CSV written by `simulate`.
    #[arg(long, group = "reference_source")]
    pub truth: Option<PathBuf>,
    /// Reference: tipping-bucket gauge CSV.
    #[arg(long, group = "reference_source")]
    pub tbrg: Option<PathBuf>,
    /// Reference: another estimates file.
    #[arg(long, group = "reference_source")]
    pub reference: Option<PathBuf>,
    /// Station to compare; may be omitted when the estimates hold one.
    #[arg(long)]
    pub station: Option<String>,
    /// Gauge intervals longer than this are dry, minutes.
    #[arg(long, default_value_t = 60)]
    pub tbrg_timeout_min: i64,
    /// With `--elevation`, report the ground footprint of the wet path.
    #[arg(long)]
    pub h0: Option<f64>,
    /// Station elevation angle for the footprint, degrees.
    #[arg(long)]
    pub elevation: Option<f64>,
    /// Metrics report; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, stdout, stderr),
        Command::Process(a) => cmd_process(&a, stdout, stderr),
        Command::Curve(a) => cmd_curve(&a, stdout, stderr),
        Command::Compare(a) => cmd_compare(&a, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p).map_err(usage(&p.display().to_string())),
        None => Ok(EngineConfig::default()),
    }
}

pub fn default_station() -> StationRecord {
    StationRecord {
        default_isotherm_km: Some(DEFAULT_H0_KM),
        ..StationRecord::new("S01", DEFAULT_ELEVATION_DEG)
    }
}

struct Setup {
    cfg: EngineConfig,
    stations: Vec<StationRecord>,
    forecast: Option<IsothermForecast>,
    transits: TransitSchedule,
}

fn load_setup(c: &CommonArgs) -> CliResult<Setup> {
    let cfg = load_config(c.config.as_deref())?;
    let stations = match &c.stations {
        Some(p) => load_registry(p).map_err(usage(&p.display().to_string()))?,
        None => vec![default_station()],
    };
    let forecast = match &c.forecast {
        Some(p) => Some(IsothermForecast::load(p).map_err(usage(&p.display().to_string()))?),
        None => None,
    };
    let transits = match &c.transit_schedule {
        Some(p) => TransitSchedule::load(p).map_err(usage(&p.display().to_string()))?,
        None => TransitSchedule::default(),
    };
    Ok(Setup {
        cfg,
        stations,
        forecast,
        transits,
    })
}

fn open_out<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> CliResult<Box<dyn Write + 'a>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn write_err(e: io::Error) -> CliError {
    CliError::Data(format!("write failed: {e}"))
}

/// Synthetic telemetry for every station, with truth.
pub struct Simulation {
    /// Telemetry lines, one section per station in registry order.
    pub telemetry: Vec<String>,
    pub truth: Vec<(String, TruthSample)>,
}

/// Isotherm height the simulator uses for an event starting at `t`.
fn sim_h0(station: &StationRecord, forecast: Option<&IsothermForecast>, t: Timestamp) -> f64 {
    forecast
        .and_then(|f| f.lookup_h0(t, f64::INFINITY).ok())
        .or(station.default_isotherm_km)
        .unwrap_or(DEFAULT_H0_KM)
}

/// Builds the synthetic run. With the built-in scenario and several
/// stations, events are dealt out round-robin so that they do not look
/// like a simultaneous fade across the network.
pub fn simulate(
    cfg: &EngineConfig,
    stations: &[StationRecord],
    forecast: Option<&IsothermForecast>,
    transits: &TransitSchedule,
    scenario: &RainScenario,
    seed: u64,
    start: Timestamp,
) -> crate::Result<Simulation> {
    scenario.validate()?;
    let start_k = time::minute_index(start);
    let n = scenario.duration_min as usize;
    let mut telemetry = Vec::new();
    let mut truth = Vec::new();
    for (si, st) in stations.iter().enumerate() {
        let mut trace = gen_dry(&cfg.dry_model, start_k, n, &mut station_rng(seed, si as u64))?;
        let mut station_truth: Vec<TruthSample> = (0..n)
            .map(|i| TruthSample {
                k: start_k + i as i64,
                rate_mm_per_h: 0.0,
                l_rain_db: 0.0,
            })
            .collect();
        for ev in scenario.events_for(&st.id) {
            let h0 = sim_h0(st, forecast, time::from_minute_index(start_k + ev.start_min as i64));
            let g = RainPathGeometry::new(
                st.elevation_deg,
                h0,
                st.melting_thickness_km.unwrap_or(cfg.melting_thickness_km),
                cfg.ml_coeffs,
                cfg.ll_coeffs,
            )?;
            let t = inject_rain(&mut trace, &[ev], &g, &cfg.link, &cfg.carrier)?;
            for (dst, src) in station_truth.iter_mut().zip(t) {
                if src.rate_mm_per_h > 0.0 {
                    *dst = src;
                }
            }
        }
        let mut sched = ImpairmentSchedule::default();
        for w in transits.windows().iter().filter(|w| w.station_id == st.id) {
            let (a, b) = (w.first_k() - start_k, w.last_k() - start_k);
            if a < 0 || b >= n as i64 {
                continue;
            }
            sched.sun_transits.push(SunTransitSpec {
                start_min: a as u32,
                duration_min: (b - a) as u32,
                depth_db: w.depth_db,
            });
        }
        sched.gain_steps = scenario
            .gain_steps
            .iter()
            .filter(|g| g.station.as_deref().is_none_or(|s| s == st.id))
            .map(|g| (g.at_min, g.delta_db))
            .collect();
        apply_impairments(&mut trace, &sched);
        for (i, z) in trace.samples().into_iter().enumerate() {
            telemetry.push(format_record(&st.id, time::from_minute_index(start_k + i as i64), z));
        }
        truth.extend(station_truth.into_iter().map(|t| (st.id.clone(), t)));
    }
    Ok(Simulation { telemetry, truth })
}

/// The built-in scenario, with events dealt round-robin over `stations`.
pub fn standard_scenario(stations: &[StationRecord]) -> RainScenario {
    let mut sc = RainScenario::standard();
    if stations.len() > 1 {
        for (i, ev) in sc.events.iter_mut().enumerate() {
            ev.station = Some(stations[i % stations.len()].id.clone());
        }
    }
    sc
}

pub fn truth_csv(truth: &[(String, TruthSample)]) -> String {
    let mut s = String::from(TRUTH_CSV_HEADER);
    s.push('\n');
    for (id, t) in truth {
        s.push_str(&format!(
            "{id},{},{},{}\n",
            time::format(time::from_minute_index(t.k)),
            fmt_sig4(t.rate_mm_per_h),
            fmt_db(t.l_rain_db)
        ));
    }
    s
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let s = load_setup(&a.common)?;
    let start = time::parse(&a.start).map_err(usage("--start"))?;
    let scenario = match &a.scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            RainScenario::parse_toml(&text).map_err(usage(&p.display().to_string()))?
        }
        None => standard_scenario(&s.stations),
    };
    let sim = simulate(&s.cfg, &s.stations, s.forecast.as_ref(), &s.transits, &scenario, a.seed, start)
        .map_err(usage("simulate"))?;
    {
        let mut out = open_out(a.out.as_deref(), stdout)?;
        for line in &sim.telemetry {
            writeln!(out, "{line}").map_err(write_err)?;
        }
        out.flush().map_err(write_err)?;
    }
    if let Some(p) = &a.truth {
        std::fs::write(p, truth_csv(&sim.truth))
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    }
    writeln!(
        stderr,
        "simulated {} station(s) x {} min from {} (seed {}): {} event(s), {} gain step(s)",
        s.stations.len(),
        scenario.duration_min,
        time::format(start),
        a.seed,
        scenario.events.len(),
        scenario.gain_steps.len()
    )
    .map_err(write_err)?;
    for ev in &scenario.events {
        writeln!(
            stderr,
            "  event at +{} min, {} min, {:?}, peak {} mm/h, {} mm{}",
            ev.start_min,
            ev.duration_min,
            ev.shape,
            fmt_sig4(ev.peak_rate),
            fmt_sig4(ev.analytic_total_mm()),
            ev.station.as_ref().map(|s| format!(" on {s}")).unwrap_or_default()
        )
        .map_err(write_err)?;
    }
    Ok(())
}

fn read_input(path: Option<&Path>) -> CliResult<Box<dyn BufRead>> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufReader::new(f)))
        }
        _ => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).map_err(io_data("stdin"))?;
            Ok(Box::new(io::Cursor::new(buf)))
        }
    }
}

fn cmd_process(a: &ProcessArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let mut s = load_setup(&a.common)?;
    if a.no_mask {
        s.cfg.sun_transit_masking = false;
    }
    let mut engine = match &a.resume {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Engine::restore(s.cfg, s.stations, s.forecast, s.transits, &text)
                .map_err(usage(&p.display().to_string()))?
        }
        None => Engine::new(s.cfg, s.stations, s.forecast, s.transits).map_err(usage("engine"))?,
    };
    let reader = read_input(a.input.as_deref())?;
    let known: Vec<String> = engine.stations().iter().map(|s| s.id.clone()).collect();
    let ing = ingest(reader, |id| known.iter().any(|k| k == id)).map_err(data("telemetry"))?;
    let batch: Vec<(&str, &[_])> = ing
        .stations
        .iter()
        .map(|(id, v)| (id.as_str(), v.as_slice()))
        .collect();
    let mut output = engine.run_batch(batch).map_err(data("processing"))?;
    write_outputs(&mut output, a.out.as_deref(), a.events.as_deref(), stdout)?;
    if let Some(p) = &a.checkpoint {
        std::fs::write(p, engine.checkpoint())
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    }
    let ed = engine.diagnostics();
    let mut summary = format!(
        "processed {} record(s), {} event(s); input {}; {}",
        output.records.len(),
        output.events.len(),
        ing.diagnostics.rejections(),
        ed.quality()
    );
    if ed.rejected() > 0 {
        summary.push_str(&format!("; engine {}", ed.rejections()));
    }
    writeln!(stderr, "{summary}").map_err(write_err)?;
    for m in ing.diagnostics.messages.iter().chain(&ed.messages) {
        writeln!(stderr, "  {m}").map_err(write_err)?;
    }
    Ok(())
}

fn write_outputs(
    output: &mut EngineOutput,
    out: Option<&Path>,
    events: Option<&Path>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    sort_records(&mut output.records);
    sort_events(&mut output.events);
    {
        let mut w = open_out(out, stdout)?;
        for r in &output.records {
            writeln!(w, "{}", r.to_json_line()).map_err(write_err)?;
        }
        w.flush().map_err(write_err)?;
    }
    if let Some(p) = events {
        let mut s = String::from(EVENTS_CSV_HEADER);
        s.push('\n');
        for e in &output.events {
            s.push_str(&e.to_csv_row());
            s.push('\n');
        }
        std::fs::write(p, s).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

/// Parses a drop grid: `""`, `a,b,c` or `start:step:end` (end included
/// up to rounding).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, step, b] = parts[..] else {
            return Err(format!("`{spec}`: expected start:step:end"));
        };
        let (a, step, b) = (num(a)?, num(step)?, num(b)?);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(format!("`{spec}`: need step > 0 and end >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    spec.split(',').map(num).collect()
}

fn cmd_curve(a: &CurveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let grid = parse_grid(&a.grid).map_err(|m| CliError::Usage(format!("--grid {m}")))?;
    let mut h0s: Vec<f64> = Vec::new();
    for &h in &a.h0 {
        if h0s.contains(&h) {
            writeln!(stderr, "warning: duplicate h0 {h} km ignored").map_err(write_err)?;
        } else {
            h0s.push(h);
        }
    }
    let delta = a.melting_thickness.unwrap_or(cfg.melting_thickness_km);
    let xi = cfg.xi().map_err(usage("config"))?;
    let mut rows = String::from("h0_km,snr_drop_db,rate_mm_per_h\n");
    for h0 in h0s {
        let g = RainPathGeometry::new(a.elevation, h0, delta, cfg.ml_coeffs, cfg.ll_coeffs)
            .map_err(usage("geometry"))?;
        for p in characteristic_curve(&g, xi, &grid).map_err(usage("curve"))? {
            rows.push_str(&format!(
                "{h0:.3},{},{}\n",
                fmt_db(p.snr_drop_db),
                fmt_sig4(p.rate_mm_per_h)
            ));
        }
    }
    let mut w = open_out(a.out.as_deref(), stdout)?;
    w.write_all(rows.as_bytes()).map_err(write_err)?;
    w.flush().map_err(write_err)
}

fn read_estimates(path: &Path) -> CliResult<Vec<EstimateLine>> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_data("estimates"))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::Data(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn read_truth(path: &Path, station: &str) -> CliResult<MinuteSeries> {
    #[derive(Deserialize)]
    struct Row {
        station_id: String,
        timestamp: String,
        true_rate_mm_per_h: f64,
    }
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = MinuteSeries::new();
    for row in rdr.deserialize() {
        let row: Row = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if row.station_id == station {
            let t = time::parse(&row.timestamp).map_err(data("truth"))?;
            out.insert(time::minute_index(t), row.true_rate_mm_per_h);
        }
    }
    Ok(out)
}

fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> CliResult<()> {
    let est_lines = read_estimates(&a.input)?;
    let station = match &a.station {
        Some(s) => s.clone(),
        None => {
            let ids: BTreeMap<&str, ()> =
                est_lines.iter().map(|l| (l.station_id.as_str(), ())).collect();
            match ids.len() {
                1 => ids.keys().next().unwrap().to_string(),
                0 => return Err(CliError::Data("estimates file is empty".into())),
                _ => return Err(CliError::Usage("several stations in estimates; pass --station".into())),
            }
        }
    };
    let est = estimates_to_minutes(&est_lines, &station).map_err(data("estimates"))?;
    let reference = if let Some(p) = &a.truth {
        read_truth(p, &station)?
    } else if let Some(p) = &a.tbrg {
        let log = TbrgLog::load(p).map_err(data(&p.display().to_string()))?;
        let timeout = chrono::Duration::minutes(a.tbrg_timeout_min);
        steps_to_minutes(&tbrg_rate(&log, Some(timeout)))
    } else if let Some(p) = &a.reference {
        estimates_to_minutes(&read_estimates(p)?, &station).map_err(data("reference"))?
    } else {
        return Err(CliError::Usage("one of --truth, --tbrg or --reference is required".into()));
    };
    let m = compare(&est, &reference).map_err(data("compare"))?;
    let mut report = format!("station = {station}\n");
    report.push_str(&m.to_report());
    match (a.h0, a.elevation) {
        (Some(h0), Some(el)) => {
            let d = ground_footprint(h0, el.to_radians()).map_err(usage("footprint"))?;
            report.push_str(&format!("footprint_km = {d:.3}\n"));
        }
        (None, None) => {}
        _ => return Err(CliError::Usage("--h0 and --elevation go together".into())),
    }
    let mut w = open_out(a.out.as_deref(), stdout)?;
    w.write_all(report.as_bytes()).map_err(write_err)?;
    w.flush().map_err(write_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_grid("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_grid("0:0.5:2").unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0.1:0.1:0.3").unwrap().len(), 3);
        assert!(parse_grid("1:0:2").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn round_robin_only_with_several_stations() {
        let one = standard_scenario(&[default_station()]);
        assert!(one.events.iter().all(|e| e.station.is_none()));
        let st: Vec<_> = ["A", "B"].iter().map(|id| StationRecord::new(*id, 40.0)).collect();
        let two = standard_scenario(&st);
        let who: Vec<_> = two.events.iter().map(|e| e.station.clone().unwrap()).collect();
        assert_eq!(who, ["A", "B", "A"]);
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["satrain", "frobnicate"], &mut o, &mut e), 1);
        assert_eq!(run(["satrain", "curve", "--grid", "1:0:2"], &mut o, &mut e), 1);
        assert_eq!(run(["satrain", "--help"], &mut o, &mut e), 0);
    }
}
