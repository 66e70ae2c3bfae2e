use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinectl")).args(args).current_dir(cwd).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.json");
    std::fs::write(&p, r#"{"model": {"num_bodies": 1, "muscles_per_level": 4}}"#).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["eval"], &["eval", "--controller", "policy"], &["bench", "--steps", "x"], &[]] {
        let out = run(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--help"), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["eval", "--controller", "fdat", "--config", "/nonexistent.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["eval", "--controller", "policy", "--checkpoint", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["bench", "--steps", "0", "--config", &small_config(dir.path())], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_writes_trial_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(&["eval", "--controller", "fdat", "--trials", "3", "--samples", "5", "--seed", "4", "--config", &cfg, "--out", "report.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("trial,controller,errorC,errorS"));
    assert!(lines[4].starts_with("summary,fdat,"));
}

#[test]
fn bench_prints_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bench", "--steps", "5", "--config", &small_config(dir.path()), "--out", "t.json"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    for k in ["fdatStepTime", "policyStepTime", "ratio"] {
        assert!(v[k].as_f64().unwrap() > 0.0);
    }
    assert!(dir.path().join("t.json").exists());
}

#[test]
fn train_eval_policy_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(&["train", "--steps", "64", "--seed", "1", "--config", &cfg, "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/train_log.csv").exists());
    let out = run(
        &["eval", "--controller", "policy", "--checkpoint", "run/checkpoint.json", "--trials", "2", "--samples", "3", "--config", &cfg, "--out", "p.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for (input, img) in [("p.csv", "a.svg"), ("run/train_log.csv", "b.svg")] {
        let out = run(&["plot", input, "--out", img], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(std::fs::read_to_string(dir.path().join(img)).unwrap().contains("<svg"));
    }
}

#[test]
fn fdat_track_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fdat-track", "--steps", "10", "--config", &small_config(dir.path()), "--out", "t.csv"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn serve_reports_bound_address() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut child = Command::new(env!("CARGO_BIN_EXE_spinectl"))
        .args(["serve", "--bind", "127.0.0.1:0", "--config", &cfg, "--out", "addr.json"])
        .current_dir(dir.path())
        .env_remove("SPINECTL_PORT")
        .spawn()
        .unwrap();
    let addr_file = dir.path().join("addr.json");
    let mut addr = None;
    for _ in 0..100 {
        if let Ok(text) = std::fs::read_to_string(&addr_file) {
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                addr = v["address"].as_str().map(str::to_string);
                break;
            }
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let addr = addr.expect("server did not start");
    let spec: serde_json::Value = reqwest::blocking::get(format!("http://{addr}/v1/spec")).unwrap().json().unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(spec["obsDim"], 8);
    assert_eq!(spec["actDim"], 4);
    assert_eq!(spec["maxSteps"], 30);
}
