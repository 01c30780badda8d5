//! End-to-end checks of the command-line front end: exit codes, artifact
//! layout, and byte-level trace determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_criticality")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("criticality-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn check_reports_assumption_constants() {
    let out = tmp_dir("check");
    let res = run(&[
        "check",
        "--scenario",
        "scen-const",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("alpha = 1.5"), "stdout: {stdout}");
    assert!(stdout.contains("rho = 0.25"));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"alpha\": 1.5"));
    assert!(Path::new(&out.join("summary.csv")).exists());
}

#[test]
fn malformed_scenario_exits_with_config_code() {
    let out = tmp_dir("bad");
    let bad = out.join("bad.json");
    std::fs::write(&bad, "{ \"grid\": { \"n_cells\": 4 } }").unwrap();
    let res = run(&[
        "check",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    let record: serde_json::Value =
        serde_json::from_str(stderr.trim()).expect("machine-readable error");
    assert_eq!(record["kind"], "config");
}

#[test]
fn missing_scenario_file_exits_with_config_code() {
    let out = tmp_dir("missing");
    let res = run(&[
        "check",
        "--scenario",
        "/nonexistent/nowhere.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn pipeline_writes_trace_and_summary() {
    let out = tmp_dir("pipe");
    let res = run(&[
        "pipeline",
        "--scenario",
        "scen-const",
        "--target",
        "1e-7",
        "--oracle",
        "on",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = trace
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(rows.len() >= 5);
    assert!(rows.iter().any(|r| r["phase"] == "power"));
    assert!(rows
        .iter()
        .any(|r| r["phase"].as_str().unwrap().starts_with("newton")));
    // Soundness of every certified row against the oracle column.
    for r in &rows {
        if let (Some(b), Some(e)) = (r["certified_bound"].as_f64(), r["oracle_error"].as_f64()) {
            assert!(b >= e, "row {r}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["e_hat"].as_f64().unwrap() <= 1e-7);
    assert_eq!(summary["converged"], true);
}

#[test]
fn traces_are_byte_identical_for_fixed_seed() {
    let out1 = tmp_dir("det1");
    let out2 = tmp_dir("det2");
    for out in [&out1, &out2] {
        let res = run(&[
            "pipeline",
            "--scenario",
            "scen-const",
            "--target",
            "1e-6",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    let t1 = std::fs::read(out1.join("trace.jsonl")).unwrap();
    let t2 = std::fs::read(out2.join("trace.jsonl")).unwrap();
    assert_eq!(t1, t2, "deterministic traces must match byte for byte");
}

#[test]
fn scenario_file_round_trips_through_cli() {
    let out = tmp_dir("file");
    let path = out.join("scen.json");
    let scenario = criticality::scenario::scen_het();
    std::fs::write(&path, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();
    let res = run(&[
        "check",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("alpha = 1.1"), "stdout: {stdout}");
}

#[test]
fn env_variables_override_defaults() {
    let out = tmp_dir("env");
    let res = Command::new(bin())
        .args(["check", "--out", out.to_str().unwrap()])
        .env("CRITICALITY_SCENARIO", "scen-het")
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("alpha = 1.1"));
}

#[test]
fn scenario_newton_section_sets_defaults() {
    let out = tmp_dir("newton-section");
    let path = out.join("scen.json");
    let mut scenario = criticality::scenario::scen_const();
    scenario.newton = Some(criticality::scenario::NewtonSpec {
        schedule: Some("quad".into()),
        zeta: None,
        target: Some(1e-6),
        backend: Some("oracle".into()),
    });
    std::fs::write(&path, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();
    let res = run(&[
        "newton",
        "--scenario",
        path.to_str().unwrap(),
        "--oracle",
        "on",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schedule"], "Quad");
    assert_eq!(summary["target"], 1e-6);
    assert!(summary["e_hat"].as_f64().unwrap() <= 1e-6);
}
