mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::dir_bytes;
use serde_json::Value;
use tempfile::TempDir;
use trio::signal::{load_recording, read_markers_csv};
use trio::synth::{generate_session, SessionConfig};

fn trio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trio"))
        .args(args)
        .env("TRIO_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = trio(args);
    assert!(
        out.status.success(),
        "trio {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A short session written under a fresh temp dir; returns the dir and the
/// contaminated container path.
fn session() -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 6;
    generate_session(&cfg, 4).unwrap().write(tmp.path().join("s")).unwrap();
    let input = tmp.path().join("s/contaminated");
    (tmp, input)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_truth_and_config_and_honours_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    ok(&["simulate", "--seed", "3", "--out", p(&out), "--protocol.n_trials=2", "--cardiac.bpm=72"]);
    for f in ["contaminated", "clean", "truth_markers.csv", "mixing.json", "config.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let cfg = read_json(&out.join("config.json"));
    assert_eq!(cfg["protocol"]["n_trials"], 2);
    assert_eq!(cfg["cardiac"]["bpm"], 72.0);
    let rec = load_recording(out.join("contaminated")).unwrap();
    assert_eq!(rec.n_channels(), 15);
}

#[test]
fn missing_input_fails_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trio(&["run-all", "--in", p(&tmp.path().join("nope")), "--out", p(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let (tmp, input) = session();
    let out = trio(&[
        "ga-correct",
        "--in",
        p(&input),
        "--out",
        p(&tmp.path().join("o")),
        "--gradient.window_reps=4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = trio(&["ga-correct", "--in", p(&input), "--out", p(&tmp.path().join("o")), "--gradient.nope=1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = trio(&["drift", "--frames", "10", "--frame-period", "0.01", "--span", "0.1", "--x=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rpeaks_writes_a_marker_list() {
    let (tmp, input) = session();
    let peaks = tmp.path().join("peaks.csv");
    let suspects = tmp.path().join("suspects.csv");
    ok(&["rpeaks", "--in", p(&input), "--out", p(&peaks), "--suspects", p(&suspects)]);
    let list = read_markers_csv(&peaks).unwrap();
    let truth = read_markers_csv(tmp.path().join("s/truth_markers.csv")).unwrap().with_label("R_PEAK");
    assert!(list.len().abs_diff(truth.len()) <= 1, "{} vs {}", list.len(), truth.len());
    assert!(list.iter().all(|m| m.label == "R_PEAK"));
    let header = std::fs::read_to_string(&suspects).unwrap();
    assert!(header.starts_with("peak_index,sample,reason"));
}

#[test]
fn chained_subcommands_equal_run_all() {
    let (tmp, input) = session();
    let t = tmp.path();
    ok(&["ga-correct", "--in", p(&input), "--out", p(&t.join("ga"))]);
    ok(&["bcg-correct", "--in", p(&t.join("ga")), "--out", p(&t.join("bcg"))]);
    let cca = ok(&[
        "cca-clean",
        "--in",
        p(&t.join("bcg")),
        "--out",
        p(&t.join("chained")),
        "--report",
        p(&t.join("components.csv")),
        "--components",
        p(&t.join("variates.csv")),
    ]);
    ok(&["run-all", "--in", p(&input), "--out", p(&t.join("full"))]);
    assert_eq!(dir_bytes(&t.join("chained")), dir_bytes(&t.join("full")));

    // the default threshold is reported and drives the component table
    let stage: Value = serde_json::from_slice(&cca.stdout).unwrap();
    assert_eq!(stage["parameters"]["rho_threshold"], 0.4);
    let table = std::fs::read_to_string(t.join("components.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("window,index,rho,rejected"));
    assert_eq!(lines.count(), 5);
    let variates = std::fs::read_to_string(t.join("variates.csv")).unwrap();
    assert!(variates.starts_with("sample,c0,c1,c2,c3,c4"));
}

#[test]
fn report_parameters_reproduce_the_run() {
    let (tmp, input) = session();
    let t = tmp.path();
    ok(&[
        "run-all",
        "--in",
        p(&input),
        "--out",
        p(&t.join("a")),
        "--keep-intermediate",
        "--cca.rho_threshold=0.5",
    ]);
    let report = read_json(&t.join("a.report.json"));
    assert_eq!(report["status"], "ok");
    assert_eq!(report["parameters"]["cca"]["rho_threshold"], 0.5);
    for stage in ["gradient", "pulse", "cca"] {
        assert!(t.join(format!("a.stage_{stage}")).exists());
    }
    ok(&[
        "run-all",
        "--config",
        p(&t.join("a.report.json")),
        "--out",
        p(&t.join("b")),
        "--report",
        p(&t.join("b.json")),
    ]);
    assert_eq!(dir_bytes(&t.join("a")), dir_bytes(&t.join("b")));
    assert_eq!(read_json(&t.join("b.json"))["parameters"]["cca"]["rho_threshold"], 0.5);
}

#[test]
fn all_stages_off_is_a_no_op() {
    let (tmp, input) = session();
    let out = tmp.path().join("o");
    ok(&[
        "run-all",
        "--in",
        p(&input),
        "--out",
        p(&out),
        "--stages.gradient=false",
        "--stages.pulse=false",
        "--stages.cca=false",
    ]);
    assert_eq!(read_json(&tmp.path().join("o.report.json"))["status"], "no-op");
    assert_eq!(dir_bytes(&input), dir_bytes(&out));
}

#[test]
fn failing_stage_is_flagged_in_the_report() {
    let (tmp, input) = session();
    let out = tmp.path().join("o");
    let run = trio(&["run-all", "--in", p(&input), "--out", p(&out), "--keep-intermediate", "--cca.eeg=Z9"]);
    assert_eq!(run.status.code(), Some(2));
    let report = read_json(&tmp.path().join("o.report.json"));
    assert_eq!(report["status"], "failed");
    assert_eq!(report["failed_stage"], "cca");
    assert_eq!(report["partial"], true);
    assert!(tmp.path().join("o.stage_pulse").exists());
    assert!(!out.exists());
}

#[test]
fn evaluation_subcommands_write_tables() {
    let (tmp, input) = session();
    let t = tmp.path();
    let erp = ok(&[
        "epoch-erp",
        "--in",
        p(&t.join("s/clean")),
        "--out",
        p(&t.join("erp.csv")),
        "--pre",
        "0.2",
        "--post",
        "0.8",
        "--baseline",
        "-0.2,0",
        "--truth",
        p(&t.join("s/clean")),
        "--correlation",
        p(&t.join("r.csv")),
    ]);
    let summary: Value = serde_json::from_slice(&erp.stdout).unwrap();
    assert_eq!(summary["trials"], 6);
    assert!((summary["correlation"]["mean"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(std::fs::read_to_string(t.join("r.csv")).unwrap().starts_with("channel,r"));

    ok(&["spectra", "--in", p(&input), "--out", p(&t.join("spec.csv")), "--channels", "C3,ECG", "--n-fft", "1000"]);
    let spec = std::fs::read_to_string(t.join("spec.csv")).unwrap();
    assert_eq!(spec.lines().count(), 1 + 501);

    let drift = ok(&["drift", "--frames", "9900", "--frame-period", "0.0101", "--span", "99.16"]);
    let d: Value = serde_json::from_slice(&drift.stdout).unwrap();
    assert!((d["drift_ms_per_s"].as_f64().unwrap() - 8.3).abs() < 0.05);
    assert_eq!(d["exceeds_threshold"], false);
}

#[test]
fn snr_reads_csv_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    std::fs::write(t.join("img.csv"), "1,-1,1,-1\n5,5,0,0\n").unwrap();
    std::fs::write(t.join("roi.csv"), "0,0,0,0\n1,1,0,0\n").unwrap();
    std::fs::write(t.join("noise.csv"), "1,1,1,1\n0,0,0,0\n").unwrap();
    let out = ok(&[
        "snr",
        "--image",
        p(&t.join("img.csv")),
        "--roi",
        p(&t.join("roi.csv")),
        "--noise",
        p(&t.join("noise.csv")),
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["snr"].as_f64().unwrap() - 5.0).abs() < 1e-12);
}
