use std::path::Path;
use std::process::{Command, Output};

use heis_core::report::parse_csv_table;
use serde_json::Value;

fn heis(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heis"))
        .args(args)
        .current_dir(dir)
        .env_remove("HEIS_JOBS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn section_h_sqnorm_writes_720_unit_radii() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sqnorm_s1.json", r#"{"function": {"builtin": "sqnorm"}, "height": 1.0}"#);
    let out = heis(dir.path(), &["section-h", "--config", &cfg, "--csv", "out.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv_table(&std::fs::read_to_string(dir.path().join("out.csv")).unwrap()).unwrap();
    assert_eq!(header, ["dir_1", "dir_2", "radius"]);
    assert_eq!(rows.len(), 720);
    assert!(rows.iter().all(|r| (r[2] - 1.0).abs() < 1e-9));
}

#[test]
fn concave_input_fails_convexity_with_violation_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "concave.json", r#"{"function": {"expr": "-x1^2", "n": 1}, "samples": {"points": 20}}"#);
    let out = heis(dir.path(), &["convexity", "--config", &cfg, "--csv", "v.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let (_, rows) = parse_csv_table(&std::fs::read_to_string(dir.path().join("v.csv")).unwrap()).unwrap();
    assert!(!rows.is_empty());
    assert_eq!(report(&out)["stages"][0]["status"], "fail");
}

#[test]
fn malformed_json_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"height\": 1,\n  oops\n}");
    let out = heis(dir.path(), &["section-h", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["line"], 3);
    assert!(err["column"].as_u64().unwrap() > 0);
}

#[test]
fn unknown_subcommand_and_unknown_key_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(heis(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let cfg = write(dir.path(), "typo.json", r#"{"hieght": 1}"#);
    assert_eq!(heis(dir.path(), &["section-h", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(heis(dir.path(), &["chain", "--budget", "enormous"]).status.code(), Some(2));
}

#[test]
fn non_convex_section_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "concave.json", r#"{"function": {"expr": "-x1^2"}}"#);
    let out = heis(dir.path(), &["section-h", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "numerical");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.json", r#"{"samples": {"pairs": 30, "probes": 4}, "seed": 11}"#);
    let a = heis(dir.path(), &["engulfing", "--config", &cfg, "--jobs", "1"]);
    let b = heis(dir.path(), &["engulfing", "--config", &cfg, "--jobs", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = heis(dir.path(), &["engulfing", "--config", &cfg, "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn every_reported_constant_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.json", r#"{"center": [0, 0, 0], "points": [[3, 0, 0], [0, 0, 1.7320508075688772]]}"#);
    let out = heis(dir.path(), &["quasimetric", "--config", &cfg, "--budget", "quick", "--csv", "m.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    assert_eq!(rep["config"]["seed"], 0);
    for stage in rep["stages"].as_array().unwrap() {
        for c in stage["constants"].as_array().unwrap() {
            let p = c[1]["provenance"].as_str().unwrap();
            assert!(["exact", "est", "bracket"].contains(&p));
        }
    }
    let (_, rows) = parse_csv_table(&std::fs::read_to_string(dir.path().join("m.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[0][2] - 1.0).abs() < 1e-3 && (rows[1][2] - 1.0).abs() < 1e-3);
}

#[test]
fn csv_output_round_trips_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.json", r#"{"function": {"builtin": "wang"}, "r_grid": [1, 2, 4, 8, 10]}"#);
    let out = heis(dir.path(), &["m-M", "--config", &cfg, "--csv", "mm.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    let (_, rows) = parse_csv_table(&std::fs::read_to_string(dir.path().join("mm.csv")).unwrap()).unwrap();
    let consts = rep["stages"][0]["constants"].as_array().unwrap();
    for (i, row) in rows.iter().enumerate() {
        let m = consts[2 * i][1]["value"].as_f64().unwrap();
        assert_eq!(row[1].to_bits(), m.to_bits());
    }
    assert!(rows.windows(2).all(|w| w[1][3] > w[0][3]));
}

#[test]
fn example_verify_small_grid_emits_profile_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"grid": {"n_rho": 9, "n_t": 9}, "rho_grid": [0, 2, 3]}"#);
    let out = heis(dir.path(), &["example-verify", "--config", &cfg, "--budget", "quick", "--csv", "p.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let (_, rows) = parse_csv_table(&std::fs::read_to_string(dir.path().join("p.csv")).unwrap()).unwrap();
    for r in &rows {
        assert!((r[1] - r[2]).abs() < 1e-3, "{r:?}");
    }
    let gp = std::fs::read_to_string(dir.path().join("p.gp")).unwrap();
    assert!(gp.contains("p.csv"));
}

#[test]
fn decompose_requires_target() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(heis(dir.path(), &["decompose"]).status.code(), Some(2));
    let cfg = write(dir.path(), "d.json", r#"{"target": [0.3, -0.2, 1.5], "strategy": "minmax"}"#);
    let out = heis(dir.path(), &["decompose", "--config", &cfg, "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(rep["stages"][0]["name"], "decompose");
}

#[test]
fn heis_jobs_must_be_a_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_heis"))
        .args(["decompose"])
        .env("HEIS_JOBS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
