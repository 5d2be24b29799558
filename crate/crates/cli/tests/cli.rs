use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nsv_core::io::{parse_config, CSV_HEADER, CSV_NAME, LATEST_SNAPSHOT};

fn nsv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsv-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "[grid]\nn_x = 8\n[kinetic]\nn_v = 8\n[time]\nt_end = 0.04\n";

#[test]
fn defaults_document_parses() {
    let out = nsv(&["defaults"]);
    assert!(out.status.success());
    let cfg = parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.grid.n_x, 32);
}

#[test]
fn run_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = nsv(&["--log-level", "warn", "run", &cfg, "--output-dir", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read_to_string(a.join(CSV_NAME)).unwrap();
    assert_eq!(csv_a, fs::read_to_string(b.join(CSV_NAME)).unwrap());
    assert!(csv_a.starts_with(CSV_HEADER));
    assert_eq!(csv_a.lines().count(), 6);

    let snap = a.join(LATEST_SNAPSHOT);
    let out = nsv(&["resume", snap.to_str().unwrap(), "--until", "0.06", "--output-dir", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("t = 0.060000"));
    let csv = fs::read_to_string(a.join(CSV_NAME)).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.starts_with(&csv_a));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[grid]\nn_x = 9\n[time]\nt_end = 1.0\n", "grid.n_x"),
        ("[grid]\nn_x = 8\nn_y = 8\n[time]\nt_end = 1.0\n", "grid.n_y"),
        ("[grid]\nn_x = 8\n", "time"),
    ];
    for (body, key) in cases {
        let cfg = write_config(dir.path(), body);
        let out = nsv(&["run", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(key), "{key}: {err}");
    }
}

#[test]
fn missing_files_and_bad_arguments_fail() {
    let out = nsv(&["run", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.toml"));
    let out = nsv(&["resume", "/nonexistent/latest.nsv", "--until", "1.0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = nsv(&["resume", "x.nsv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nsv(&["--log-level", "loud", "defaults"]);
    assert_eq!(out.status.code(), Some(2));
}
