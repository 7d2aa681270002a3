//! End-to-end tests of the command-line binary: scenario loading, flag
//! overrides, CSV shape, exit codes, and output determinism.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parisian"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(body.as_bytes()).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn assert_csv_shape(text: &str) {
    let mut lines = text.lines();
    let header = lines.next().expect("missing header");
    let cols = header.split(',').count();
    for line in lines {
        assert_eq!(line.split(',').count(), cols, "ragged row: {line}");
    }
}

const SYMMETRIC: &str = r#"{
  "model": { "family": "brownian_drift", "mu": 0.0 },
  "query": { "a": 0.0, "b": 1.0, "x": 0.5, "u": 1.0, "v": 1.0 }
}"#;

#[test]
fn order_prob_symmetric_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", SYMMETRIC);
    let out = bin()
        .args(["order-prob", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_csv_shape(&text);
    assert!(
        text.contains("order_probability,0.500000000000,"),
        "{text}"
    );
}

#[test]
fn ruin_recurrent_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "s.json",
        r#"{ "model": { "family": "reflected_bm" }, "query": { "a": 1.0, "u": 2.0 } }"#,
    );
    let out = bin().args(["ruin", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("ruin_probability,1.000000000000,"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn flag_overrides_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", SYMMETRIC);
    // Moving the start to the lower barrier breaks the symmetry.
    let out = bin()
        .args(["order-prob", "--x", "0", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("order_probability,0.357412887583,"), "{text}");
}

#[test]
fn out_flag_writes_the_same_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", SYMMETRIC);
    let out_path = dir.path().join("result.csv");
    let out = bin()
        .args(["order-prob", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert_csv_shape(&written);
    assert!(written.starts_with("quantity,value,std_error\n"));
}

#[test]
fn missing_field_is_exit_2_and_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "s.json",
        r#"{ "model": { "family": "brownian_drift" }, "query": { "a": 0.0, "b": 1.0 } }"#,
    );
    let out = bin()
        .args(["order-prob", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("x"), "stderr should name the field: {err}");
}

#[test]
fn malformed_json_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", "{ not json");
    let out = bin()
        .args(["order-prob", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_scenario_flag_is_exit_2() {
    let out = bin().arg("order-prob").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--scenario"), "{err}");
}

#[test]
fn unknown_subcommand_is_exit_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invert_cdf_rows_parse_and_increase() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "s.json",
        r#"{
  "model": { "family": "brownian_drift", "mu": 0.0 },
  "query": { "a": 0.0, "x": 0.0, "u": 1.0 },
  "t_grid": [0.5, 2.0, 5.0]
}"#,
    );
    let out = bin()
        .args(["invert-cdf", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_csv_shape(&text);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,cdf");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].1, 0.0);
    assert!(rows[1].1 > 0.0 && rows[2].1 > rows[1].1);
}

const SIM_SMALL: &str = r#"{
  "model": { "family": "brownian_drift", "mu": 0.0 },
  "query": { "a": 0.0, "b": 1.0, "x": 0.5, "u": 1.0, "v": 1.0 },
  "gamma": 0.5,
  "lambda": 0.5,
  "sim": { "n_paths": 400, "dt": 0.01, "horizon": 60.0, "seed": 11 }
}"#;

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", SIM_SMALL);
    let run = |threads: &str| {
        let out = bin()
            .args(["simulate", "--scenario"])
            .arg(&path)
            .env("PARISIAN_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        stdout(&out)
    };
    let one = run("1");
    let two = run("2");
    assert_eq!(one, two, "output depends on worker count");
    assert_csv_shape(&one);
    assert!(one.contains("order_probability,"));
    assert!(one.contains("pair_laplace,"));
}

#[test]
fn simulate_seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", SIM_SMALL);
    let base = bin()
        .args(["simulate", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    let reseeded = bin()
        .args(["simulate", "--seed", "99", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_ne!(stdout(&base), stdout(&reseeded));
}
