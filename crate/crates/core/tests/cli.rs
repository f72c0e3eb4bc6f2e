use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rarefx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rarefx")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_estimate_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = rarefx(&[
        "simulate", "--phi", "0.5", "--sigma", "1", "--n", "400", "--horizon", "60", "--t0", "55", "--delta", "3,2",
        "--seed", "1", "--out", path(&sim),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);

    let est = dir.path().join("est");
    let out = rarefx(&[
        "estimate", "--panel", path(&sim.join("panel.csv")), "--t0", "55", "--d", "2", "--out", path(&est),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let effect = fs::read_to_string(est.join("effect.csv")).unwrap();
    let mut lines = effect.lines();
    assert_eq!(lines.next(), Some("k,delta_hat,lower,upper"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(first[2] < 3.0 && 3.0 < first[3], "{first:?}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(rarefx(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(rarefx(&["fit-ar", "--t0", "5"]).status.code(), Some(2));
    assert_eq!(rarefx(&["simulate", "--phi", "abc"]).status.code(), Some(2));
}

#[test]
fn invalid_inputs_exit_with_two_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = rarefx(&["fit-ar", "--panel", path(&missing), "--t0", "5", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = rarefx(&[
        "simulate", "--phi", "1.5", "--sigma", "1", "--n", "3", "--horizon", "10", "--seed", "1", "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("zeros.csv");
    let mut text = String::from("series_id,date,value\n");
    for t in 0..10 {
        text.push_str(&format!("a,{t},0\n"));
    }
    fs::write(&panel, text).unwrap();
    let out = rarefx(&["fit-ar", "--panel", path(&panel), "--t0", "8", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
