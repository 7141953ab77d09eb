//! End-to-end runs of the `hjlab` binary on small configs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(config: &str, dir: &Path) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hjlab"))
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .output()
        .unwrap()
}

const EFFECTIVE: &str = r#"{
  "domain": { "hole": { "shape": "disc", "radius": 0.25 } },
  "grid": { "metric_h": 0.125, "cell_h": 0.125, "cell_dt": 0.25 },
  "experiment": { "kind": "effective", "epsilons": [1.0], "p_list": [[-1.0, 0.0]], "TOL": 0.05 }
}"#;

#[test]
fn effective_axis_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&EFFECTIVE.replace("\"TOL\"", "\"tol\""), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/effective.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("Hbar_metric,-1,0,")).expect("metric row");
    let value: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((value - 0.5).abs() <= 0.05, "{row}");
    let summary: Value = serde_json::from_slice(&fs::read(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], Value::Bool(true));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(EFFECTIVE, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config::RunConfig"));
}

#[test]
fn coarse_grid_reports_unresolved_hole() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "domain": { "hole": { "shape": "disc", "radius": 0.25 },
                  "eta": { "schedule": "power", "coefficient": 1.0, "exponent": 0.5 } },
      "grid": { "h": 0.1 },
      "experiment": { "kind": "dilute" }
    }"#;
    let out = run(cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unresolved hole"));
}

#[test]
fn failed_check_exits_one() {
    // a zero tolerance cannot absorb the gap between the two routes
    let dir = tempfile::tempdir().unwrap();
    let out = run(&EFFECTIVE.replace("\"TOL\": 0.05", "\"tol\": 0.0"), dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL route_agreement"));
}

#[test]
fn missing_file_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_hjlab"))
        .args(["run", "/nonexistent/config.json", "--quiet"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = r#"{
      "model": { "family": "kinetic_weight" },
      "grid": { "h": 0.125 },
      "experiment": { "kind": "solve", "epsilons": [0.5, 0.25], "times": [0.5, 1.0] },
      "output": { "threads": 2 }
    }"#;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(run(cfg, d.path()).status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4, "{names:?}");
    for n in names {
        assert_eq!(
            fs::read(a.path().join("out").join(&n)).unwrap(),
            fs::read(b.path().join("out").join(&n)).unwrap(),
            "{n:?}"
        );
    }
}
