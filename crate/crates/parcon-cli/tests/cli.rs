//! Exit-code and file-output behavior of the binary: 0 = completed (any
//! verdict), 2 = input error, 3 = numerical failure.

use std::fs;
use std::process::Command;

fn parcon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parcon"))
}

fn write(dir: &std::path::Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

#[test]
fn cascade_config_is_controllable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "check.json",
        r#"{
            "a": [[[0.0],[0.0],[0.0]],[[1.0],[0.0],[0.0]],[[0.0],[1.0],[0.0]]],
            "b": [[[1.0]],[[0.0]],[[0.0]]],
            "p": 2,
            "oracle": true
        }"#,
    );
    let out = parcon()
        .args(["check", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .arg("--json")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["controllable"], serde_json::json!(true));
    assert_eq!(report["oracle_agrees"], serde_json::json!(true));
    assert!(dir.path().join("check_verdict.json").exists());
}

#[test]
fn zero_control_matrix_completes_with_negative_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "check.json",
        r#"{
            "a": [[[0.0],[1.0]],[[0.0],[0.0]]],
            "b": [[[0.0]],[[0.0]]],
            "p": 1
        }"#,
    );
    let out = parcon()
        .args(["check", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .arg("--json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "negative verdicts still exit 0");
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["controllable"], serde_json::json!(false));
    assert_eq!(report["rank"], serde_json::json!(0));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "broken.json", "{ this is not json");
    let out = parcon()
        .args(["check", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input error"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "check.json",
        r#"{"a": [[[0.0]]], "b": [[[1.0]]], "p": 1, "turbo": true}"#,
    );
    let out = parcon()
        .args(["check", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("turbo"));
}

#[test]
fn witness_precondition_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // G < 2m+1
    let config = write(
        dir.path(),
        "wit.json",
        r#"{"m": 7, "g": 14, "t_final": 0.005, "m_list": [2,3,4,5]}"#,
    );
    let out = parcon()
        .args(["witness", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synthesize_writes_control_and_trajectory_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "synth.json",
        r#"{
            "alpha": {"cosine_coeffs": [0.0, 0.0067379469990855, 0.0000453999297624849]},
            "y0": [1.0, 0.0, 0.0, 0.0],
            "z0": [0.0, 1.0, 0.0, 0.0],
            "omega": [1.0, 2.0],
            "t_final": 0.5,
            "k": 4
        }"#,
    );
    let out = parcon()
        .args(["synthesize", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .arg("--json")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report["closed_loop_relative"].as_f64().unwrap() < 1e-6);

    let control = fs::read_to_string(dir.path().join("control.csv")).unwrap();
    assert!(control.starts_with("t,gamma\n"));
    let trajectory = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("t,component,mode,coefficient\n"));
    assert!(dir.path().join("synthesis_report.json").exists());
}

#[test]
fn synthesize_flags_a_failing_decay_condition() {
    let dir = tempfile::tempdir().unwrap();
    // slowly decaying cosine coefficients: fitted rate well below π
    let config = write(
        dir.path(),
        "synth.json",
        r#"{
            "alpha": {"cosine_coeffs": [0.0, 0.5, 0.33, 0.25, 0.2, 0.17, 0.14, 0.12, 0.11]},
            "y0": [1.0, 0.0, 0.0, 0.0, 0.0],
            "z0": [0.0, 0.0, 0.0, 0.0, 0.0],
            "omega": [1.0, 2.0],
            "t_final": 0.5,
            "k": 5
        }"#,
    );
    let out = parcon()
        .args(["synthesize", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .arg("--json")
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["decay_fit"]["satisfied"], serde_json::json!(false));
}

#[test]
fn hum_requires_exactly_one_source_of_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = parcon()
        .args(["hum", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = parcon()
        .args(["hum", "--preset", "nonexistent", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hum_small_sweep_writes_csv_and_gnuplot_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "hum.json",
        r#"{
            "domain": {"a": 0.0, "b": 6.283185307179586},
            "omega": [0.0, 3.141592652589793],
            "t_final": 1.0,
            "n_steps": 40,
            "alpha": {"constant": 1.0},
            "y0": {"sine": {"frequency": 1.0, "amplitude": 10.0}},
            "n_cells": [12, 16, 20, 24],
            "epsilon_scale": 0.15915494309189535
        }"#,
    );
    let out = parcon()
        .args(["hum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .args(["--gnuplot", "--threads", "2", "--json"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("hum_sweep.csv")).unwrap();
    assert!(csv.starts_with("h,epsilon,min_F,u_norm,yT_norm,cg_iters,fenchel_gap\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("hum_sweep.dat").exists());
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report["slopes"]["y_t_norm"].as_f64().is_some());
}

#[test]
fn cg_budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "hum.json",
        r#"{
            "domain": {"a": 0.0, "b": 6.283185307179586},
            "omega": [0.0, 3.141592652589793],
            "t_final": 1.0,
            "n_steps": 40,
            "alpha": {"constant": 1.0},
            "y0": {"sine": {"frequency": 1.0, "amplitude": 10.0}},
            "n_cells": [24],
            "cg_max_iter": 2
        }"#,
    );
    let out = parcon()
        .args(["hum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical failure"));
}
