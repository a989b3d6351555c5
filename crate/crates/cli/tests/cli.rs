use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use stokeslab::iso::DeformationPath;
use stokeslab::rh::fixtures;
use stokeslab::scalar::C64;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stokeslab"));
    c.env("STOKESLAB_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, v: &impl serde::Serialize) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dim_prints_surface_dimension() {
    for m in ["1,1,1,1", "2,1,1"] {
        let n = m.split(',').count().to_string();
        let o = run(&["monodromy", "dim", "--g", "0", "--r", "2", "--n", &n, "--m", m]);
        assert_eq!(code(&o), 0);
        assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "2");
    }
    let o = run(&["monodromy", "dim", "--g", "0", "--r", "2", "--n", "3", "--m", "1,1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["nonsense"])), 1);
    assert_eq!(code(&run(&["exponents", "check", "/no/such/file.json"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"tolerances": {"ode": 0}}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "monodromy", "dim", "--g", "0", "--r", "2", "--n", "1", "--m", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn fuchs_violation_exits_two_with_residual() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"r":2,"d":0,"n":2,"m":[1,1],"a":[[[[0.5,0]],[[0.0,0]]],[[[0.25,0]],[[0.0,0]]]]}"#).unwrap();
    let o = run(&["exponents", "check", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let doc = stdout_json(&o);
    assert_eq!(doc["valid"], Value::Bool(false));
    assert!((doc["fuchs_residual_abs"].as_f64().unwrap() - 0.75).abs() < 1e-15);
    assert!(String::from_utf8_lossy(&o.stderr).contains("residual"));

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"r":2,"d":0,"n":2,"m":[1,1],"a":[[[[0.5,0]],[[0.0,0]]],[[[-0.5,0]],[[0.0,0]]]]}"#).unwrap();
    assert_eq!(code(&run(&["exponents", "check", good.to_str().unwrap()])), 0);
}

#[test]
fn exponent_subcommands_and_directions() {
    let dir = TempDir::new().unwrap();
    // One order-3 point with tops 1 and i, and a Fuchsian point.
    let nu = r#"{"r":2,"d":0,"n":2,"m":[3,1],
        "a":[[[[1,0],[0,0],[0.25,0]],[[0,1],[0,0],[0.1,0]]],[[[-0.2,0]],[[-0.15,0]]]]}"#;
    let p = dir.path().join("nu.json");
    std::fs::write(&p, nu).unwrap();
    let f = p.to_str().unwrap();
    let o = run(&["exponents", "classify", f]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["generic"], Value::Bool(true));
    let o = run(&["exponents", "decompose", f, "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("point,j,residue_re"));
    let o = run(&["stokes", "directions", f, "--point", "0"]);
    let doc = stdout_json(&o);
    assert_eq!(doc["total_multiplicity"], doc["expected_total"]);
    assert_eq!(doc["expected_total"], 4);
    let o = run(&["stokes", "directions", f, "--point", "0", "--format", "table"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 5);
    assert_eq!(code(&run(&["stokes", "directions", f, "--point", "5"])), 2);
}

#[test]
fn counterexample_round_trips_and_fails_to_match_at_full_depth() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pair.json");
    let o = run(&["formal", "counterexample", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let doc = stdout_json(&o);
    assert_eq!(doc, read(out.to_str().unwrap()));
    assert_eq!(doc["gauge_maps_first_to_second"], Value::Bool(true));
    assert_ne!(doc["exponents_first"], doc["exponents_second"]);
    // The second presentation is [[z^-6, z^-4], [0, z^-6]].
    let a = &doc["second"]["A"];
    let term = |i: usize, j: usize| a[i][j]["terms"].clone();
    assert_eq!(term(0, 0), serde_json::json!([[-6, "1", "0"]]));
    assert_eq!(term(0, 1), serde_json::json!([[-4, "1", "0"]]));
    assert_eq!(term(1, 0), serde_json::json!([]));
    assert_eq!(term(1, 1), serde_json::json!([[-6, "1", "0"]]));

    let o = run(&["formal", "counterexample", "--depth", "24"]);
    let doc = stdout_json(&o);
    let v = write(dir.path(), "v.json", &doc["first"]);
    let w = write(dir.path(), "w.json", &doc["second"]);
    let o = run(&["formal", "match-depth", &v, &w]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = stdout_json(&o);
    assert_eq!(m["isomorphic"], Value::Bool(false));
    assert_eq!(m["depth"], 24);
    assert_eq!(m["depth_guaranteed"], Value::Bool(true));
}

#[test]
fn diagonalize_reports_exponents() {
    let dir = TempDir::new().unwrap();
    let o = run(&["formal", "counterexample", "--depth", "8"]);
    let doc = stdout_json(&o);
    let v = write(dir.path(), "v.json", &doc["first"]);
    let o = run(&["formal", "diagonalize", &v]);
    // Equal leading eigenvalues: not generic.
    assert_eq!(code(&o), 2);
}

#[test]
fn rh_compute_check_and_normalize() {
    let dir = TempDir::new().unwrap();
    let conn = write(dir.path(), "conn.json", &fixtures::painleve_v());
    let out = dir.path().join("mono.json");
    let outs = out.to_str().unwrap();
    let o = run(&["rh", "compute", &conn, "--tol", "1e-8", "--out", outs]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = stdout_json(&o);
    assert!(doc["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(doc, read(outs));

    // Byte-identical on a second run.
    let again = run(&["rh", "compute", &conn, "--tol", "1e-8"]);
    assert_eq!(o.stdout, again.stdout);

    let o = run(&["rh", "check", outs, "--conn", &conn]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(stdout_json(&o)["ok"], Value::Bool(true));

    let norm = dir.path().join("norm.json");
    let o = run(&["monodromy", "normalize", outs, "--out", norm.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let parsed: stokeslab::monodromy::MonodromyData<C64> =
        stokeslab::io::monodromy_from_json(&read(norm.to_str().unwrap())).unwrap();
    assert_eq!(stokeslab::io::monodromy_to_json(&parsed), stdout_json(&o));

    let o = run(&["monodromy", "residual", outs]);
    assert!(stdout_json(&o)["residual"].as_f64().unwrap() <= 1e-8);
    let o = run(&["monodromy", "rank", outs]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["rank"], 3);

    // A tampered Stokes multiplier breaks the relation.
    let mut bad = read(outs);
    bad["monodromy"]["points"][0]["stokes"][0][0][1] = serde_json::json!([5.0, 0.0]);
    bad["monodromy"]["points"][0]["stokes"][0][1][0] = serde_json::json!([5.0, 0.0]);
    let badp = write(dir.path(), "bad.json", &bad);
    assert_eq!(code(&run(&["rh", "check", &badp])), 2);
}

#[test]
fn iso_flow_writes_end_point_and_report() {
    let dir = TempDir::new().unwrap();
    let start = fixtures::painleve_vi(C64::new(0.3, 1.4));
    let conn = write(dir.path(), "conn.json", &start);
    let path = write(
        dir.path(),
        "path.json",
        &DeformationPath::pole_loop(&start, 2, C64::new(0.4, 1.4), 12),
    );
    let end = dir.path().join("end.json");
    let report = dir.path().join("drift.csv");
    let o = run(&[
        "iso",
        "flow",
        &conn,
        &path,
        "--tol",
        "1e-12",
        "--out",
        end.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = stdout_json(&o);
    assert_eq!(doc["method"], "schlesinger");
    assert!(doc["drift"].as_f64().unwrap() <= 1e-6);
    assert!(doc["invariant_drift"].as_f64().unwrap() <= 1e-9);
    let end_conn: stokeslab::rh::RationalConnection = serde_json::from_value(read(end.to_str().unwrap())).unwrap();
    assert_eq!(serde_json::to_value(&end_conn).unwrap(), doc["end"]);
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("s,t0_re,t0_im,tr0_re"));
    assert!(csv.lines().count() > 12);

    let o = run(&["iso", "drift", &conn, end.to_str().unwrap()]);
    assert!(stdout_json(&o)["drift"].as_f64().unwrap() <= 1e-6);

    let bad_path = write(
        dir.path(),
        "collide.json",
        &DeformationPath::pole_segment(&start, 2, C64::new(1.0, 0.0), 4),
    );
    assert_eq!(code(&run(&["iso", "flow", &conn, &bad_path])), 3);
}
