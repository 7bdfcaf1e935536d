//! Rain gauge processing and estimate-vs-reference metrics.
//!
//! A tipping-bucket gauge logs one timestamp per tip of `Δc` mm. Between
//! consecutive tips the punctual rate is `Δc / (t_i − t_{i−1})`. Estimates,
//! synthetic truth and gauge rates are compared on the one-minute grid.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use chrono::Duration;
use serde::Serialize;

use crate::pipeline::EstimateLine;
use crate::time::{self, Timestamp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TbrgLog {
    pub tip_resolution_mm: f64,
    pub tip_times: Vec<Timestamp>,
}

/// Constant rate on the half-open interval `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStep {
    pub start: Timestamp,
    pub end: Timestamp,
    pub rate_mm_per_h: f64,
}

impl RateStep {
    pub fn amount_mm(&self) -> f64 {
        self.rate_mm_per_h * time::hours_between(self.start, self.end)
    }
}

const RESOLUTION_KEY: &str = "tip_resolution_mm";

impl TbrgLog {
    pub fn new(tip_resolution_mm: f64, tip_times: Vec<Timestamp>) -> Result<Self> {
        if !(tip_resolution_mm.is_finite() && tip_resolution_mm > 0.0) {
            return Err(Error::invalid(
                "tip_resolution_mm",
                format!("{tip_resolution_mm} must be > 0"),
            ));
        }
        for w in tip_times.windows(2) {
            if w[1] == w[0] {
                return Err(Error::invalid(
                    "tip_times",
                    format!("coincident tips at {}", time::format(w[0])),
                ));
            }
            if w[1] < w[0] {
                return Err(Error::invalid(
                    "tip_times",
                    format!("{} follows {}", time::format(w[1]), time::format(w[0])),
                ));
            }
        }
        Ok(Self {
            tip_resolution_mm,
            tip_times,
        })
    }

    /// Reads the gauge CSV: a `# tip_resolution_mm = <mm>` line, a
    /// `timestamp` header and one RFC 3339 timestamp per line.
    pub fn parse_csv(reader: impl BufRead) -> Result<Self> {
        let mut resolution = None;
        let mut header_seen = false;
        let mut tips = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=') {
                    if k.trim() == RESOLUTION_KEY {
                        let v: f64 = v.trim().parse().map_err(|_| Error::Config {
                            line: i + 1,
                            message: format!("bad {RESOLUTION_KEY} `{}`", v.trim()),
                        })?;
                        resolution = Some(v);
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "timestamp" {
                    return Err(Error::Config {
                        line: i + 1,
                        message: format!("expected `timestamp` header, got `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            tips.push(time::parse(line).map_err(|e| Error::Config {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        let resolution = resolution.ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing `# {RESOLUTION_KEY} = ...` header"),
        })?;
        Self::new(resolution, tips)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::parse_csv(std::io::BufReader::new(f))
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# {RESOLUTION_KEY} = {}\ntimestamp\n", self.tip_resolution_mm);
        for t in &self.tip_times {
            s.push_str(&time::format(*t));
            s.push('\n');
        }
        s
    }
}

/// Stepwise punctual rate between consecutive tips.
///
/// Intervals longer than `timeout` are dry: the tip ending them is the
/// first of a new shower, not the tail of a very light one.
pub fn tbrg_rate(log: &TbrgLog, timeout: Option<Duration>) -> Vec<RateStep> {
    log.tip_times
        .windows(2)
        .map(|w| {
            let dt = w[1] - w[0];
            let rate = match timeout {
                Some(limit) if dt > limit => 0.0,
                _ => log.tip_resolution_mm / time::hours_between(w[0], w[1]),
            };
            RateStep {
                start: w[0],
                end: w[1],
                rate_mm_per_h: rate,
            }
        })
        .collect()
}

/// Trapezoidal running total of a sampled rate series, in mm.
pub fn cumulate(series: &[(Timestamp, f64)]) -> Result<Vec<(Timestamp, f64)>> {
    let mut out = Vec::with_capacity(series.len());
    let mut total = 0.0;
    for (i, &(t, r)) in series.iter().enumerate() {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("rate", format!("{r} at {}", time::format(t))));
        }
        if i > 0 {
            let (t0, r0) = series[i - 1];
            if t <= t0 {
                return Err(Error::invalid(
                    "time",
                    format!("{} does not follow {}", time::format(t), time::format(t0)),
                ));
            }
            total += 0.5 * (r0 + r) * time::hours_between(t0, t);
        }
        out.push((t, total));
    }
    Ok(out)
}

/// Running total of a stepwise series, exact at each step end.
pub fn cumulate_steps(steps: &[RateStep]) -> Vec<(Timestamp, f64)> {
    let mut total = 0.0;
    steps
        .iter()
        .map(|s| {
            total += s.amount_mm();
            (s.end, total)
        })
        .collect()
}

/// Horizontal length of the slanted wet path, `h0 / tan θ_e`, in km.
pub fn ground_footprint(h0_km: f64, theta_e_rad: f64) -> Result<f64> {
    if !(h0_km.is_finite() && h0_km > 0.0) {
        return Err(Error::invalid("h0_km", format!("{h0_km} must be > 0")));
    }
    if !(theta_e_rad > 0.0 && theta_e_rad < std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid(
            "theta_e",
            format!("{theta_e_rad} rad must be in (0, π/2)"),
        ));
    }
    Ok(h0_km / theta_e_rad.tan())
}

/// Rate per one-minute slot, keyed by minute index.
pub type MinuteSeries = BTreeMap<i64, f64>;

/// Step-hold resampling: slot `k` takes the rate of the step containing
/// its timestamp. Slots outside `[first tip, last tip]` are not covered.
pub fn steps_to_minutes(steps: &[RateStep]) -> MinuteSeries {
    let mut out = MinuteSeries::new();
    let (Some(first), Some(last)) = (steps.first(), steps.last()) else {
        return out;
    };
    let mut i = 0;
    for k in time::minute_index(first.start)..=time::minute_index(last.end) {
        let t = time::from_minute_index(k);
        if t < first.start {
            continue;
        }
        while i < steps.len() && steps[i].end < t {
            i += 1;
        }
        // t == start of the first step belongs to no interval; hold its rate
        let rate = steps.get(i).map_or(0.0, |s| s.rate_mm_per_h);
        out.insert(k, rate);
    }
    out
}

/// Estimate lines for one station as a minute series; dry samples count
/// as zero, raining samples without a rate are skipped.
pub fn estimates_to_minutes<'a>(
    lines: impl IntoIterator<Item = &'a EstimateLine>,
    station_id: &str,
) -> Result<MinuteSeries> {
    let mut out = MinuteSeries::new();
    for l in lines.into_iter().filter(|l| l.station_id == station_id) {
        let k = time::minute_index(time::parse(&l.timestamp)?);
        match (l.rain_flag, l.rate_mm_per_h) {
            (false, _) => {
                out.insert(k, 0.0);
            }
            (true, Some(r)) => {
                out.insert(k, r);
            }
            (true, None) => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareMetrics {
    pub samples: usize,
    pub peak_time_error_s: f64,
    /// `None` when the reference never rains.
    pub peak_rate_ratio: Option<f64>,
    pub cumulative_ratio: Option<f64>,
    pub estimated_cumulative_mm: f64,
    pub reference_cumulative_mm: f64,
    pub rmse: f64,
}

fn peak(series: &[(i64, f64)]) -> (i64, f64) {
    series
        .iter()
        .copied()
        .fold((series[0].0, f64::NEG_INFINITY), |best, p| {
            if p.1 > best.1 {
                p
            } else {
                best
            }
        })
}

/// Trapezoidal total over consecutive slots of a minute series, in mm.
fn total_mm(series: &[(i64, f64)]) -> f64 {
    series
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0) as f64 / 60.0)
        .sum()
}

/// Metrics on the slots both series cover.
pub fn compare(estimated: &MinuteSeries, reference: &MinuteSeries) -> Result<CompareMetrics> {
    let common: Vec<(i64, f64, f64)> = estimated
        .iter()
        .filter_map(|(k, e)| reference.get(k).map(|r| (*k, *e, *r)))
        .collect();
    if common.is_empty() {
        return Err(Error::DisjointCoverage);
    }
    let est: Vec<(i64, f64)> = common.iter().map(|c| (c.0, c.1)).collect();
    let refr: Vec<(i64, f64)> = common.iter().map(|c| (c.0, c.2)).collect();
    let (ke, pe) = peak(&est);
    let (kr, pr) = peak(&refr);
    let (ce, cr) = (total_mm(&est), total_mm(&refr));
    let mse = common.iter().map(|c| (c.1 - c.2).powi(2)).sum::<f64>() / common.len() as f64;
    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    Ok(CompareMetrics {
        samples: common.len(),
        peak_time_error_s: ((ke - kr).abs() * time::SAMPLE_PERIOD_S) as f64,
        peak_rate_ratio: ratio(pe, pr),
        cumulative_ratio: ratio(ce, cr),
        estimated_cumulative_mm: ce,
        reference_cumulative_mm: cr,
        rmse: mse.sqrt(),
    })
}

impl CompareMetrics {
    /// `key = value` report, one metric per line.
    pub fn to_report(&self) -> String {
        use crate::pipeline::output::fmt_sig4;
        let opt = |x: Option<f64>| x.map(fmt_sig4).unwrap_or_else(|| "null".into());
        format!(
            "samples = {}\npeak_time_error_s = {}\npeak_rate_ratio = {}\ncumulative_ratio = {}\nestimated_cumulative_mm = {}\nreference_cumulative_mm = {}\nrmse_mm_per_h = {}\n",
            self.samples,
            self.peak_time_error_s,
            opt(self.peak_rate_ratio),
            opt(self.cumulative_ratio),
            fmt_sig4(self.estimated_cumulative_mm),
            fmt_sig4(self.reference_cumulative_mm),
            fmt_sig4(self.rmse),
        )
    }
}
