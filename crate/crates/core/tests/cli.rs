//! End-to-end runs of the `airdg` binary and its exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn airdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airdg")).args(args).output().unwrap()
}

fn run_with(dir: &Path, sub: &str, config: &str) -> Output {
    let cfg = dir.join("run.ini");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    airdg(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn solve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(
        dir.path(),
        "solve",
        "[mesh]\nnx = 2\nny = 2\n[run]\npreset = decay-test\n[time]\nintegrator = backward-euler\ndt = 0.05\nT = 0.1\n",
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/observers.csv").exists());
    assert!(dir.path().join("out/field_000002.vtk").exists());
}

#[test]
fn probe_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = run_with(dir.path(), "probe", "[mesh]\nnx = 2\nny = 2\n[run]\npreset = smooth-mms\nsamples = 10\n");
    assert_eq!(good.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&good.stdout).contains("overall"));
    let bad = run_with(
        dir.path(),
        "probe",
        "[mesh]\nnx = 4\nny = 4\n[dg]\nsigma0 = 0\n[run]\npreset = smooth-mms\nsamples = 10\n",
    );
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), "solve", "[dg]\nk = 7\n[run]\npreset = decay-test\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(airdg(&["solve"]).status.code(), Some(1));
    assert_eq!(airdg(&["solve", "--config", "/nonexistent/run.ini"]).status.code(), Some(1));
    assert_eq!(airdg(&["--help"]).status.code(), Some(0));
}

#[test]
fn blow_up_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(
        dir.path(),
        "solve",
        "[mesh]\nnx = 8\nny = 8\n[run]\npreset = smooth-mms\n[time]\nintegrator = forward-euler\ndt = 0.01\nT = 5\n",
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
