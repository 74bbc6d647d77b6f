use std::process::{Command, Output};

use serde_json::Value;

const EUCLIDEAN: &str = r#"{"kind":"euclidean","n":2}"#;
const SPHERE: &str = r#"{"kind":"sphere","dim":3}"#;
const HOPF: &str = r#"{"type":"hopf","c":0.3}"#;

/// Runs the binary without a cache directory, adding a seed when none is given.
fn run(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_randers-lab"));
    cmd.args(args).env_remove("RANDERS_LAB_CACHE");
    if !args.iter().any(|a| matches!(*a, "--seed" | "--config" | "selftest")) {
        cmd.args(["--seed", "1"]);
    }
    cmd.output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn close(v: &Value, expected: f64) -> bool {
    (v.as_f64().unwrap() - expected).abs() < 1e-12
}

#[test]
fn convert_reproduces_the_minkowski_fixture() {
    let out = run(&["--space", EUCLIDEAN, "--wind", r#"{"type":"euclidean-const","v":[0.5,0]}"#, "convert", "--point", "0,0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &report(&out)["result"];
    assert!(close(&r["a"][0][0], 16.0 / 9.0));
    assert!(close(&r["a"][1][1], 4.0 / 3.0));
    assert!(close(&r["a"][0][1], 0.0));
    assert!(close(&r["b"][0], -2.0 / 3.0));
    assert!(close(&r["b"][1], 0.0));
}

#[test]
fn reports_carry_version_and_config_hash() {
    let out = run(&["--space", EUCLIDEAN, "--seed", "4", "distance", "--point", "0,0", "--to", "3,4"]);
    let r = report(&out);
    assert_eq!(r["command"], "distance");
    assert_eq!(r["config"]["seed"], 4);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!((r["result"]["distance"].as_f64().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn hopf_flow_is_clifford_wolf() {
    let out = run(&["--space", SPHERE, "--wind", HOPF, "cw-check", "--samples", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["result"]["cw"], true);
}

#[test]
fn rotation_is_not_clifford_wolf() {
    let rotation = r#"{"type":"sphere-skew","matrix":[[0,1,0,0],[-1,0,0,0],[0,0,0,0],[0,0,0,0]]}"#;
    let out = run(&["--space", SPHERE, "--wind", HOPF, "cw-check", "--field", rotation, "--time", "0.5", "--samples", "40"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["result"]["cw"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["--space", SPHERE, "--wind", HOPF, "--seed", "9", "cw-check", "--samples", "30"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["--space", SPHERE, "--wind", HOPF, "--seed", "10", "cw-check", "--samples", "30"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn connect_and_exhaust_pass_on_the_sphere() {
    let out = run(&["--space", SPHERE, "--wind", HOPF, "connect", "--point", "1,0,0,0", "--to", "0,0,1,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report(&out)["result"]["residual"].as_f64().unwrap() < 1e-6);
    let out = run(&["--space", SPHERE, "--wind", HOPF, "exhaust", "--directions", "20"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn geodesic_csv_starts_at_the_base_point() {
    let out = run(&["--space", SPHERE, "--wind", HOPF, "--format", "csv", "geodesic", "--point", "1,0,0,0", "--vector", "0,0,1,0", "--intervals", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "t,x0,x1,x2,x3");
    assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
}

#[test]
fn config_file_drives_a_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    let config = format!(r#"{{"space":{SPHERE},"wind":{HOPF},"seed":3,"params":{{"point":[1,0,0,0],"to":[0,1,0,0]}}}}"#);
    std::fs::write(&path, config).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "distance"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("distance.json")).unwrap()).unwrap();
    assert_eq!(written["config"]["seed"], 3);
    assert!(written["result"]["distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(run(&["--space", r#"{"kind":"sphere","dim":2}"#, "norm"]).status.code(), Some(2));
    assert_eq!(run(&["--space", SPHERE, "--wind", r#"{"type":"hopf","c":1.5}"#, "flow", "--point", "1,0,0,0"]).status.code(), Some(2));
    assert_eq!(run(&["--space", SPHERE, "norm", "--point", "1,0,0,0"]).status.code(), Some(2));
    assert_eq!(run(&["distance"]).status.code(), Some(2));
    let no_seed = Command::new(env!("CARGO_BIN_EXE_randers-lab")).args(["--space", SPHERE, "flow", "--point", "1,0,0,0"]).output().unwrap();
    assert_eq!(no_seed.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, format!(r#"{{"space":{SPHERE}}}"#)).unwrap();
    assert_eq!(run(&["--config", path.to_str().unwrap(), "flow", "--point", "1,0,0,0"]).status.code(), Some(2));
}

#[test]
fn oracle_query_reads_but_never_writes_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ["--nodes", "1000", "--k", "16"];
    let query = |cache: &std::path::Path| {
        let mut args = vec!["--seed", "1", "--space", SPHERE, "--wind", HOPF, "oracle", "query", "--point", "1,0,0,0", "--to", "0,1,0,0"];
        args.extend(graph);
        Command::new(env!("CARGO_BIN_EXE_randers-lab")).args(&args).env("RANDERS_LAB_CACHE", cache).output().unwrap()
    };
    let before = query(dir.path());
    assert!(before.status.success());
    assert_eq!(report(&before)["result"]["graph_from_cache"], false);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    let mut args = vec!["--seed", "1", "--space", SPHERE, "--wind", HOPF, "oracle", "build"];
    args.extend(graph);
    let built = Command::new(env!("CARGO_BIN_EXE_randers-lab")).args(&args).env("RANDERS_LAB_CACHE", dir.path()).output().unwrap();
    assert!(built.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let after = query(dir.path());
    let (b, a) = (report(&before)["result"].clone(), report(&after)["result"].clone());
    assert_eq!(a["graph_from_cache"], true);
    assert_eq!(a["estimate"], b["estimate"]);
    assert!(a["estimate"].as_f64().unwrap() >= a["analytic"].as_f64().unwrap() - 1e-9);
}

#[test]
fn selftest_runs_selected_criteria() {
    let out = run(&["selftest", "--only", "1,4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS [")).count(), 2);
    assert_eq!(run(&["selftest", "--only", "99"]).status.code(), Some(2));
}
