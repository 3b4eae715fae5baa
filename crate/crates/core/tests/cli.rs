//! End-to-end runs of the `slowfast` binary.

use std::path::Path;
use std::process::{Command, Output};

use slowfast_game::fixture_s1;

fn write_spec(dir: &Path, spec: &slowfast_game::GameSpec) -> std::path::PathBuf {
    let path = dir.join("spec.json");
    std::fs::write(&path, spec.to_json_string().unwrap()).unwrap();
    path
}

fn slowfast(args: &[&str], spec: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowfast"))
        .args(args)
        .arg("--spec")
        .arg(spec)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn solve_writes_every_artifact_and_a_passing_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &fixture_s1());
    let out = slowfast(&["solve", "--eps", "0.05"], &spec, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "full.csv",
        "reduced.csv",
        "reduced.json",
        "boundary.csv",
        "certificate.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let cert: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("certificate.json")).unwrap())
            .unwrap();
    let labels: Vec<&str> = cert["assumptions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            assert_eq!(a["passed"], true);
            a["assumption"].as_str().unwrap()
        })
        .collect();
    assert_eq!(labels, ["3.1", "3.2a", "3.2b", "4.1", "4.2"]);
    let full = std::fs::read_to_string(dir.path().join("full.csv")).unwrap();
    assert_eq!(full.lines().next().unwrap(), "t,P11_11,P12_11,P22_11");
}

#[test]
fn assumption_failure_is_reported_as_json_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut singular = fixture_s1();
    singular.b21[(0, 0)] = 1.0;
    let spec = write_spec(dir.path(), &singular);
    let out = slowfast(&["solve", "--eps", "0.1"], &spec, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "Delta2Singular");
    assert_eq!(err["assumption"], "3.1");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &fixture_s1());
    let out = slowfast(
        &["simulate", "--eps", "0.1", "--paths", "many"],
        &spec,
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_simulation_step_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &fixture_s1());
    let out = slowfast(
        &["simulate", "--eps", "0.1", "--step", "0.05"],
        &spec,
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "StepTooLarge");
}

#[test]
fn report_summarises_a_short_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &fixture_s1());
    let out = slowfast(
        &["report", "--eps-list", "0.1,0.03,0.01", "--paths", "500"],
        &spec,
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), text);
    assert!(text.contains("err_P11"));
}
