use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use viabilitykit::Scenario;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viabilitykit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn list_and_export() {
    let o = run(&["list"]);
    assert_eq!(code(&o), 0);
    let names: Vec<String> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    for n in [
        "example1",
        "example2",
        "disk_rotation",
        "inward_ball",
        "halfplane_transversal",
    ] {
        assert!(names.iter().any(|x| x == n), "{} missing", n);
    }
    let o = run(&["export", "example2"]);
    assert_eq!(code(&o), 0);
    let s = Scenario::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(s.canonical().unwrap(), s);
}

#[test]
fn check_first_example_reports_assumption1_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "check",
        "--scenario",
        "example1",
        "--out",
        out,
        "--emit-csv",
        "--emit-gnuplot",
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("Assumption 1 fails"));
    let rep = read_json(&dir.path().join("report_example1.json"));
    let a1 = &rep["assumptions"]["a1"];
    assert_eq!(a1["status"], "fails");
    for c in a1["x"].as_array().unwrap() {
        assert!(c.as_f64().unwrap().abs() < 1e-3);
    }
    assert_eq!(a1["v"], serde_json::json!([1.0, 0.0]));
    assert_eq!(rep["verdict"]["exit_code"], 1);
    assert!(rep["provenance"]["notes"][0]
        .as_str()
        .unwrap()
        .contains("box"));
    assert!(dir.path().join("traj_example1_0.csv").exists());
    assert!(dir.path().join("phase_example1.gp").exists());
}

#[test]
fn rotating_disk_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "check",
        "--scenario",
        "disk_rotation",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn reports_are_identical_up_to_timestamp() {
    let mut texts = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        run(&[
            "check",
            "--scenario",
            "example1",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        let mut v = read_json(&dir.path().join("report_example1.json"));
        v["timestamp"] = Value::Null;
        texts.push(v.to_string());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn single_check_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "check",
        "--scenario",
        "example1",
        "--out",
        out,
        "--check",
        "nagumo",
        "--seed",
        "7",
        "--tol",
        "1e-8",
    ]);
    assert_eq!(code(&o), 2);
    let rep = read_json(&dir.path().join("report_example1.json"));
    assert_eq!(rep["nagumo"]["check"]["status"], "holds");
    assert!(rep.get("critical_set").is_none());
    assert_eq!(rep["provenance"]["seed"], 7);
    assert_eq!(rep["provenance"]["tolerances"]["tol"], 1e-8);
}

#[test]
fn simulate_second_example_follows_the_parabola() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "simulate",
        "--scenario",
        "example2",
        "--x0",
        "0,0",
        "--out",
        out,
        "--emit-gnuplot",
    ]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&dir.path().join("traj_example2_0.csv"));
    assert_eq!(header, ["t", "x1", "x2", "dist_K", "dist_KC", "star_ok"]);
    assert_eq!(rows.len(), 501);
    for r in &rows {
        let t: f64 = r[0].parse().unwrap();
        let x2: f64 = r[2].parse().unwrap();
        assert!((x2 + t * t / 2.0).abs() <= 1e-6, "t = {}: x2 = {}", t, x2);
    }
    let gp = std::fs::read_to_string(dir.path().join("phase_example2.gp")).unwrap();
    assert!(gp.contains("traj_example2_0.csv"));
}

#[test]
fn simulate_first_example_star_property_fails_along_the_escape() {
    // The nearest point of (t, 0) on ∂K is the origin, which lies on ∂C.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "simulate",
        "--scenario",
        "example1",
        "--x0",
        "0,0",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&dir.path().join("traj_example1_0.csv"));
    for r in rows.iter().skip(1) {
        let t: f64 = r[0].parse().unwrap();
        let d: f64 = r[3].parse().unwrap();
        assert!((d - t).abs() <= 1e-6);
        assert_eq!(r[5], "false");
    }
}

#[test]
fn start_outside_constraint_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--scenario",
        "example1",
        "--x0",
        "0.5,0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stderr).unwrap().contains("not in C"));
}

#[test]
fn malformed_scenarios_report_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"name\": \"bad\",\n  \"dim\": 2,\n  \"F\": oops\n}",
    )
    .unwrap();
    let o = run(&[
        "check",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 4"));

    let text = viabilitykit::builtins::source("example1")
        .unwrap()
        .replace("x2 - x1^2", "x2 - x1^");
    std::fs::write(&bad, text).unwrap();
    let o = run(&[
        "check",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("C, column 9"), "{}", err);
}

fn cone_rows(args: &[&str]) -> Vec<(Vec<f64>, String)> {
    let dir = tempfile::tempdir().unwrap();
    let mut all = vec!["cones", "--out", dir.path().to_str().unwrap()];
    all.extend_from_slice(args);
    let o = run(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::read_dir(dir.path())
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let (header, rows) = csv_rows(&file);
    assert_eq!(header[3], "contingent");
    rows.into_iter()
        .map(|r| {
            (
                vec![r[1].parse().unwrap(), r[2].parse().unwrap()],
                r[3].clone(),
            )
        })
        .collect()
}

#[test]
fn cone_table_of_the_quadrant_corner() {
    let rows = cone_rows(&["--scenario", "example1", "--set", "K", "--x", "0,0"]);
    assert_eq!(rows.len(), 360);
    for (v, m) in rows {
        let closed = v[0] <= 1e-9 && v[1] >= -1e-9;
        assert_eq!(m == "yes", closed, "{:?}", v);
    }
}

#[test]
fn cone_table_of_the_curved_constraint() {
    let rows = cone_rows(&[
        "--scenario",
        "example2",
        "--set",
        "C",
        "--x",
        "0.3,-0.045",
        "--grid",
        "72",
    ]);
    for (v, m) in rows {
        assert_eq!(m == "yes", v[1] <= -0.3 * v[0] + 1e-9, "{:?}", v);
    }
}

#[test]
fn interior_points_have_full_cones() {
    let rows = cone_rows(&[
        "--scenario",
        "example1",
        "--set",
        "K",
        "--x",
        "-0.5,0.5",
        "--grid",
        "36",
    ]);
    assert!(rows.iter().all(|(_, m)| m == "yes"));
}

#[test]
fn cone_base_point_must_be_on_the_set() {
    let o = run(&[
        "cones",
        "--scenario",
        "example1",
        "--set",
        "dK",
        "--x",
        "-0.5,0.5",
    ]);
    assert_eq!(code(&o), 3);
}
