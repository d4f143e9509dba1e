//! End-to-end checks of the binary: exit codes, artifact layout, config
//! validation, flag/env precedence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kerrsynth"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kerrsynth-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn props_runs_green_and_writes_report() {
    let dir = tmp_dir("props");
    let cfg = write_config(&dir, "cfg.json", r#"{ "experiment": "props", "seed": 7 }"#);
    let out = dir.join("out");
    let status = bin()
        .args(["props", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["all_pass"], serde_json::Value::Bool(true));
    assert_eq!(report["config"]["seed"], serde_json::json!(7));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tmp_dir("badkey");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{ "experiment": "props", "seed": 7, "taus": 0.02 }"#,
    );
    let output = bin()
        .args(["props", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("unknown field"), "stderr: {stderr}");
}

#[test]
fn subcommand_config_mismatch_is_rejected() {
    let dir = tmp_dir("mismatch");
    let cfg = write_config(&dir, "cfg.json", r#"{ "experiment": "props" }"#);
    let output = bin()
        .args(["scaling", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn control_z_report_hits_published_tolerances() {
    let dir = tmp_dir("cz");
    let out = dir.join("out");
    let status = bin()
        .args(["control-z", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rows = report["results"]["convergence"].as_array().unwrap();
    let last = rows.last().unwrap();
    let f = last["f_conditional"].as_f64().unwrap();
    let neg = last["output_negativity"].as_f64().unwrap();
    assert!(f >= 1.0 - 2e-5, "F = {f}");
    assert!((neg - 0.5).abs() <= 1e-3, "N = {neg}");
    assert_eq!(report["results"]["monotone_in_reps"], serde_json::Value::Bool(true));
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tmp_dir("env");
    let out = dir.join("from-env");
    let status = bin()
        .arg("props")
        .env("KERRSYNTH_OUT", &out)
        .current_dir(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("report.json").exists());
}

#[test]
fn flags_override_config_keys() {
    let dir = tmp_dir("override");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{ "experiment": "scaling", "t_total": 0.4, "n_max": 64, "reps_list": [50, 100] }"#,
    );
    let out = dir.join("out");
    let status = bin()
        .args(["scaling", "--nmax", "12", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["n_max"], serde_json::json!(12));
    assert!(out.join("scaling.csv").exists());
}
