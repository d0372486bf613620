use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn opnm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opnm")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = opnm(&[
        "simulate",
        &config("dephasing_xxx.json"),
        "--set",
        "grid.n_points=5",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# opnm "));
    assert!(!text.contains('\r'));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 1 + 5 * 2);
    assert_eq!(data[0].split(',').count(), 5 + 3 + 4);
}

#[test]
fn simulate_to_stdout_and_empty_grid() {
    let o = opnm(&["simulate", &config("dephasing_xxx.json"), "--set", "grid.n_points=0", "--set", "output=null"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);
}

#[test]
fn serial_and_parallel_files_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("serial.csv");
    let b = dir.path().join("parallel.csv");
    let common = ["--set", "grid.n_points=4", "--set", "oracle.n_traj=2000"];
    let mut args = vec!["simulate", "--serial"];
    let cfg = config("dephasing_mc.json");
    args.push(&cfg);
    args.extend(common);
    args.extend(["-o", a.to_str().unwrap()]);
    assert!(opnm(&args).status.success());
    let mut args = vec!["simulate", cfg.as_str()];
    args.extend(common);
    args.extend(["-o", b.to_str().unwrap()]);
    assert!(opnm(&args).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        r#"{"model": {"type": "dephasing", "gamma": -1, "tau_c": 0.1}, "scheme": {"preset": "xxx"}, "initial_state": {"p": 1}}"#,
    );
    let o = opnm(&["simulate", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.gamma"));
    let o = opnm(&["simulate", &config("dephasing_xxx.json"), "--set", "grid.n_points=\"many\""]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.n_points"));
    let o = opnm(&["simulate", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = opnm(&["figure-data", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unsupported_combinations_exit_with_four() {
    let o = opnm(&["simulate", &config("dephasing_xxx.json"), "--set", "series.max_order=5"]);
    assert_eq!(o.status.code(), Some(4));
    let o = opnm(&["compare", &config("dephasing_xxx.json"), "--set", "oracle.kind=pseudomode"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn compare_reports_failure_with_three() {
    // one order at moderate memory misses the exact curve by far more than 1e-6
    let o = opnm(&[
        "compare",
        &config("dephasing_xxx.json"),
        "--set",
        "grid.n_points=5",
        "--set",
        "series.max_order=2",
        "--set",
        "model.tau_c=0.1",
        "--set",
        "oracle.tolerance=1e-6",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["passed"], false);
    let o = opnm(&["compare", &config("dephasing_xxx.json"), "--set", "grid.n_points=5", "--set", "oracle.tolerance=0.01"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn figure_data_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = opnm(&["figure-data", "1", "--set", "grid.n_points=3", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["files"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("fig1_xxx_gtc0.05.csv").exists());
    assert!(dir.path().join("fig1_xxx_gtc0.1.csv").exists());
}

#[test]
fn validate_prints_machine_readable_report() {
    let o = opnm(&["validate"]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["passed"], true);
    assert!(rep["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}
