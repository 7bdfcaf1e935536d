use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn satrain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satrain"))
        .args(args)
        .env_remove("SATRAIN_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let o = satrain(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn p(&self, name: &str) -> String {
        self.0.path().join(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.p(name), text).unwrap();
        self.p(name)
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.p(name)).unwrap()
    }
}

fn dry_scenario(d: &Dir, days: u32) -> String {
    d.write("dry.toml", &format!("duration_min = {}\n", days * 1440))
}

#[test]
fn simulate_is_deterministic() {
    let d = Dir::new();
    for tag in ["a", "b"] {
        ok(&["simulate", "--seed", "42", "--out", &d.p(&format!("{tag}.jsonl")), "--truth", &d.p(&format!("{tag}.csv"))]);
    }
    assert_eq!(d.read("a.jsonl"), d.read("b.jsonl"));
    assert_eq!(d.read("a.csv"), d.read("b.csv"));
    assert_eq!(d.read("a.jsonl").lines().count(), 7 * 1440);
    let other = Dir::new();
    ok(&["simulate", "--seed", "43", "--out", &other.p("c.jsonl")]);
    assert_ne!(d.read("a.jsonl"), other.read("c.jsonl"));
}

#[test]
fn zero_duration_scenario_is_empty() {
    let d = Dir::new();
    let sc = d.write("zero.toml", "duration_min = 0\n");
    let o = ok(&["simulate", "--scenario", &sc]);
    assert!(o.stdout.is_empty());
}

#[test]
fn three_stations_three_sections() {
    let d = Dir::new();
    let reg = d.write(
        "st.toml",
        "[[station]]\nid='X1'\nlat=0\nlon=0\nelevation_deg=40\n\
         [[station]]\nid='X2'\nlat=0\nlon=0\nelevation_deg=35\n\
         [[station]]\nid='X3'\nlat=0\nlon=0\nelevation_deg=45\n",
    );
    let sc = dry_scenario(&d, 1);
    let o = ok(&["simulate", "--stations", &reg, "--scenario", &sc]);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut sections: Vec<String> = Vec::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let id = v["station_id"].as_str().unwrap().to_string();
        if sections.last() != Some(&id) {
            sections.push(id);
        }
    }
    assert_eq!(sections, ["X1", "X2", "X3"]);
    assert_eq!(text.lines().count(), 3 * 1440);
}

#[test]
fn truth_csv_layout() {
    let d = Dir::new();
    ok(&["simulate", "--out", &d.p("t.jsonl"), "--truth", &d.p("truth.csv")]);
    let truth = d.read("truth.csv");
    let mut lines = truth.lines();
    assert_eq!(lines.next(), Some("station_id,timestamp,true_rate_mm_per_h,true_l_rain_db"));
    assert_eq!(lines.next(), Some("S01,2017-10-01T00:00:00Z,0,0.000"));
    let wet = truth.lines().skip(1).filter(|l| !l.ends_with(",0,0.000")).count();
    // 120 + 90 + 60 minutes of rain, open ends excluded
    assert_eq!(wet, 119 + 89 + 59);
}

#[test]
fn dry_run_has_no_events() {
    let d = Dir::new();
    let sc = dry_scenario(&d, 3);
    ok(&["simulate", "--scenario", &sc, "--out", &d.p("t.jsonl")]);
    let o = ok(&["process", "--in", &d.p("t.jsonl"), "--out", &d.p("e.jsonl"), "--events", &d.p("ev.csv")]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains(", 0 event(s)"), "{err}");
    assert_eq!(d.read("ev.csv").lines().count(), 1);
    assert_eq!(d.read("e.jsonl").lines().count(), 3 * 1440);
}

#[test]
fn corrupted_line_is_skipped() {
    let d = Dir::new();
    let sc = dry_scenario(&d, 1);
    ok(&["simulate", "--scenario", &sc, "--out", &d.p("t.jsonl")]);
    let mut lines: Vec<String> = d.read("t.jsonl").lines().map(String::from).collect();
    lines[100] = "{\"station_id\":\"S01\",\"timestamp\":".into();
    d.write("bad.jsonl", &(lines.join("\n") + "\n"));
    let o = ok(&["process", "--in", &d.p("bad.jsonl"), "--out", &d.p("e.jsonl")]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("input rejected 1 (malformed 1"), "{err}");
    assert_eq!(d.read("e.jsonl").lines().count(), 1440 - 1);
}

#[test]
fn masked_transit_window_has_no_event() {
    let d = Dir::new();
    let sc = dry_scenario(&d, 2);
    let sched = d.write(
        "transit.csv",
        "station_id,start,duration_s,depth_db\nS01,2017-10-02T12:00:00Z,720,4.0\n",
    );
    ok(&["simulate", "--scenario", &sc, "--transit-schedule", &sched, "--out", &d.p("t.jsonl")]);
    ok(&["process", "--in", &d.p("t.jsonl"), "--transit-schedule", &sched, "--out", &d.p("e.jsonl"), "--events", &d.p("ev.csv")]);
    assert_eq!(d.read("ev.csv").lines().count(), 1);
    let masked = d.read("e.jsonl").lines().filter(|l| l.contains("\"quality_flag\":\"masked\"")).count();
    assert_eq!(masked, 13);
    ok(&["process", "--in", &d.p("t.jsonl"), "--transit-schedule", &sched, "--no-mask", "--out", &d.p("e2.jsonl"), "--events", &d.p("ev2.csv")]);
    assert!(d.read("ev2.csv").lines().count() > 1);
}

#[test]
fn unreadable_input_is_a_data_error() {
    let o = satrain(&["process", "--in", "/nonexistent/telemetry.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_is_a_usage_error() {
    let d = Dir::new();
    let cfg = d.write("bad.cfg", "start_threshold_db = 0.3\nno_such_key = 1\n");
    let o = satrain(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = Command::new(env!("CARGO_BIN_EXE_satrain"))
        .args(["simulate"])
        .env("SATRAIN_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(satrain(&["process", "--bogus"]).status.code(), Some(1));
}

#[test]
fn config_file_changes_the_run() {
    let d = Dir::new();
    let cfg = d.write("c.cfg", "# brighter receiver\nsynth_mean_snr_db = 12.0\n");
    let o = ok(&["simulate", "--config", &cfg, "--scenario", &dry_scenario(&d, 1)]);
    let first: serde_json::Value =
        serde_json::from_str(String::from_utf8(o.stdout).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["esn0_db"].as_f64().unwrap() > 11.0);
}

fn curve_blocks(text: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut blocks: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let row = (f[1].parse().unwrap(), f[2].parse().unwrap());
        match blocks.last_mut() {
            Some((h, rows)) if h == f[0] => rows.push(row),
            _ => blocks.push((f[0].to_string(), vec![row])),
        }
    }
    blocks
}

#[test]
fn curve_blocks_are_monotone() {
    let o = ok(&["curve", "--h0", "1.5,2.5,4.0", "--grid", "0:0.5:8"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("h0_km,snr_drop_db,rate_mm_per_h\n"));
    let blocks = curve_blocks(&text);
    assert_eq!(blocks.len(), 3);
    for (_, rows) in &blocks {
        assert_eq!(rows.len(), 17);
        assert!(rows.windows(2).all(|w| w[1].1 > w[0].1));
    }
}

#[test]
fn curve_edge_cases() {
    let o = ok(&["curve", "--grid", ""]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "h0_km,snr_drop_db,rate_mm_per_h\n");
    let o = ok(&["curve", "--h0", "2.5,2.5,4", "--grid", "1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate h0 2.5"));
    assert_eq!(curve_blocks(&String::from_utf8(o.stdout).unwrap()).len(), 2);
    assert_eq!(satrain(&["curve", "--h0", "0.4", "--grid", "1"]).status.code(), Some(1));
}

fn simulate_and_process(d: &Dir) {
    ok(&["simulate", "--out", &d.p("t.jsonl"), "--truth", &d.p("truth.csv")]);
    ok(&["process", "--in", &d.p("t.jsonl"), "--out", &d.p("e.jsonl")]);
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{report}"))
        .to_string()
}

#[test]
fn compare_with_own_copy_is_perfect() {
    let d = Dir::new();
    simulate_and_process(&d);
    let o = ok(&["compare", "--in", &d.p("e.jsonl"), "--reference", &d.p("e.jsonl")]);
    let r = String::from_utf8(o.stdout).unwrap();
    assert_eq!(report_value(&r, "peak_time_error_s"), "0");
    assert_eq!(report_value(&r, "peak_rate_ratio"), "1.000");
    assert_eq!(report_value(&r, "cumulative_ratio"), "1.000");
    assert_eq!(report_value(&r, "rmse_mm_per_h"), "0");
}

#[test]
fn compare_against_truth() {
    let d = Dir::new();
    simulate_and_process(&d);
    let o = ok(&["compare", "--in", &d.p("e.jsonl"), "--truth", &d.p("truth.csv"), "--h0", "3", "--elevation", "40"]);
    let r = String::from_utf8(o.stdout).unwrap();
    let cum: f64 = report_value(&r, "cumulative_ratio").parse().unwrap();
    assert!((0.9..=1.1).contains(&cum), "{r}");
    assert_eq!(report_value(&r, "reference_cumulative_mm"), "60.00");
    assert_eq!(report_value(&r, "footprint_km"), "3.575");
}

#[test]
fn compare_against_gauge_log() {
    let d = Dir::new();
    let est: String = (0..20)
        .map(|m| {
            format!(
                "{{\"station_id\":\"G\",\"timestamp\":\"2017-10-01T00:{m:02}:00Z\",\"epsilon_db\":0.5,\"rain_flag\":true,\"l_rain_db\":0.2,\"rate_mm_per_h\":2.000,\"quality_flag\":\"ok\"}}\n"
            )
        })
        .collect();
    d.write("e.jsonl", &est);
    // 0.2 mm tips every 6 minutes: 2 mm/h on (0, 18]
    let gauge = d.write(
        "g.csv",
        "# tip_resolution_mm = 0.2\ntimestamp\n2017-10-01T00:00:00Z\n2017-10-01T00:06:00Z\n2017-10-01T00:12:00Z\n2017-10-01T00:18:00Z\n",
    );
    let o = ok(&["compare", "--in", &d.p("e.jsonl"), "--tbrg", &gauge]);
    let r = String::from_utf8(o.stdout).unwrap();
    assert_eq!(report_value(&r, "samples"), "19");
    assert_eq!(report_value(&r, "rmse_mm_per_h"), "0");
    assert_eq!(report_value(&r, "reference_cumulative_mm"), "0.6000");
}

#[test]
fn compare_disjoint_is_a_data_error() {
    let d = Dir::new();
    simulate_and_process(&d);
    let gauge = d.write("g.csv", "# tip_resolution_mm = 0.2\ntimestamp\n2019-01-01T00:00:00Z\n2019-01-01T00:06:00Z\n");
    let o = satrain(&["compare", "--in", &d.p("e.jsonl"), "--tbrg", &gauge]);
    assert_eq!(o.status.code(), Some(2));
    let o = satrain(&["compare", "--in", &d.p("e.jsonl")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn checkpoint_resume_from_cli() {
    let d = Dir::new();
    let sc = dry_scenario(&d, 1);
    ok(&["simulate", "--scenario", &sc, "--out", &d.p("t.jsonl")]);
    let text = d.read("t.jsonl");
    let lines: Vec<&str> = text.lines().collect();
    d.write("a.jsonl", &(lines[..700].join("\n") + "\n"));
    d.write("b.jsonl", &(lines[700..].join("\n") + "\n"));
    ok(&["process", "--in", &d.p("t.jsonl"), "--out", &d.p("full.jsonl")]);
    ok(&["process", "--in", &d.p("a.jsonl"), "--out", &d.p("ea.jsonl"), "--checkpoint", &d.p("cp.json")]);
    ok(&["process", "--in", &d.p("b.jsonl"), "--out", &d.p("eb.jsonl"), "--resume", &d.p("cp.json")]);
    assert_eq!(d.read("ea.jsonl") + &d.read("eb.jsonl"), d.read("full.jsonl"));
    let bad: PathBuf = Path::new(&d.p("cp.json")).to_path_buf();
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(satrain(&["process", "--in", &d.p("b.jsonl"), "--resume", bad.to_str().unwrap()]).status.code(), Some(1));
}
