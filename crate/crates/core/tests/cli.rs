use std::path::Path;
use std::process::Command;

use serde_json::json;

fn twophase(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_twophase")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, value: serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(&value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn data_csv(dir: &Path) -> String {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three_rows.csv");
    let target = dir.join("data.csv");
    std::fs::copy(fixture, &target).unwrap();
    target.to_string_lossy().into_owned()
}

fn fit_config(data: &str, estimators: &[&str]) -> serde_json::Value {
    json!({
        "mode": "fit",
        "data": data,
        "schema": {"y_column": "y", "x_columns": ["x"], "z_columns": ["z"], "r_column": "r"},
        "family": "linear_gaussian",
        "selection": {"form": "logistic", "terms": ["intercept", "y"]},
        "estimators": estimators
    })
}

#[test]
fn missing_config_is_a_config_error() {
    let (code, _, err) = twophase(&["fit"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("--config"));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"mode\": \"fit\", \"data\": 3").unwrap();
    let (code, _, _) = twophase(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    let cfg = write_config(dir.path(), "unknown.json", fit_config("x.csv", &["EL9"]));
    assert_eq!(twophase(&["fit", "--config", &cfg]).0, 2);
}

#[test]
fn zero_threads_is_a_config_error() {
    let (code, _, _) = twophase(&["simulate", "--preset", "table3-small", "--replications", "1", "--threads", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn bad_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "y,x,z,r\n1,abc,2,1\n").unwrap();
    let cfg = write_config(dir.path(), "fit.json", fit_config(csv.to_str().unwrap(), &["CML-pihat"]));
    let (code, _, err) = twophase(&["fit", "--config", &cfg]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("row 1"), "{err}");

    let cfg = write_config(dir.path(), "absent.json", fit_config("nowhere.csv", &["CML-pihat"]));
    assert_eq!(twophase(&["validate", "--config", &cfg]).0, 3);
}

#[test]
fn all_estimators_failing_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_csv(dir.path());
    // three rows cannot support an empirical-likelihood fit
    let cfg = write_config(dir.path(), "fit.json", fit_config(&data, &["EL5", "EL3"]));
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let (code, stdout, err) = twophase(&["fit", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{stdout}{err}");
    assert!(out.join("results.json").exists());
}

#[test]
fn simulate_preset_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, err) =
        twophase(&["simulate", "--preset", "table3-small", "--replications", "2", "--seed", "4", "--out-dir", out]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("simreport.json"));
    let csv = std::fs::read_to_string(dir.path().join("simreport.csv")).unwrap();
    assert!(csv.starts_with("# config: "));
    assert!(csv.contains("# seed: 4"));
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", json!({"mode": "simulate", "preset": "table1", "replications": 5}));
    let (code, stdout, err) = twophase(&["validate", "--config", &cfg]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("valid"));
}
