use std::path::Path;
use std::process::{Command, Output};

use cutoff_core::io::{read_profile, read_trajectory};

fn cutoff(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutoff"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(out: &Path, sub: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join(format!("{sub}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn vstate_writes_profile_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutoff(&["vstate", "--lambda", "0.03", "--grid-n", "64", "--tol", "1e-10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = read_profile(&dir.path().join("vstate_profile.csv")).unwrap();
    assert_eq!(p.n, 64);
    assert_eq!(p.y[0], 0.03);
    assert!(p.residual < 1e-10);
    let m = manifest(dir.path(), "vstate");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["parameters"]["lambda"], 0.03);
    assert!(m["outputs"].as_array().unwrap().iter().any(|v| v.as_str().unwrap().ends_with("vstate_profile.csv")));
}

#[test]
fn dynamics_trajectory_is_time_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutoff(&["dynamics", "--lambda", "0.05", "--grid-n", "24", "--t-end", "0.05", "--sample-every", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_trajectory(&dir.path().join("trajectory.csv")).unwrap();
    assert!(rows.len() >= 2);
    assert!(rows.windows(2).all(|w| w[1].0 > w[0].0));
    assert_eq!(rows[0].0, 0.0);
    assert!(dir.path().join("snapshots").is_dir());
    assert_eq!(manifest(dir.path(), "dynamics")["status"], "ok");
}

#[test]
fn model_case_and_audit_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cutoff(&["model-case", "--lambda", "0.01"], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("model_case_profile.csv").exists());
    assert_eq!(cutoff(&["operator-audit", "--grid-n", "48"], dir.path()).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("operator_coefficients.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("x,a1,a2")));
}

#[test]
fn invalid_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutoff(&["vstate", "--lambda", "0"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(manifest(dir.path(), "vstate")["status"], "error");
    assert_eq!(cutoff(&["vstate", "--grid-n", "4"], dir.path()).status.code(), Some(3));
    assert_eq!(cutoff(&["vstate", "--lambda", "abc"], dir.path()).status.code(), Some(3));
    assert_eq!(cutoff(&["no-such-command"], dir.path()).status.code(), Some(3));
}

#[test]
fn non_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutoff(&["vstate", "--lambda", "0.01", "--grid-n", "64", "--tol", "1e-14", "--max-iter", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
