use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sesop-bench");

const CONFIG: &str = r#"
name = "iso"
seed = 1

[problem]
kind = "rotated"
epsilon = 1.0
phi = 0.0

[grid]
fine_n = 31
coarsest_n = 15

[solver]
kind = "sesop"
history = 1

[stop]
tol = 1e-8
max_iter = 100
"#;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_writes_trace_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "iso.toml", CONFIG);
    let out = run(&["solve", &cfg, "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("res/iso.csv")).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("res/iso.json")).unwrap()).unwrap();
    let records = json["records"].as_array().unwrap().len();
    assert_eq!(csv.lines().count(), records + 1);
    assert!(csv.starts_with("iteration,metric,objective,factor,seconds"));
    assert_eq!(json["converged"], true);
    assert!(json["predicted_factor"].is_null());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = write(tmp.path(), "typo.toml", &CONFIG.replace("history = 1", "histroy = 1"));
    assert_eq!(run(&["solve", &typo], tmp.path()).status.code(), Some(2));
    let bad = write(tmp.path(), "bad.toml", &CONFIG.replace("fine_n = 31", "fine_n = 30"));
    let out = run(&["solve", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`grid`"));
    assert_eq!(run(&["solve", "missing.toml"], tmp.path()).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "short.toml", &CONFIG.replace("max_iter = 100", "max_iter = 2"));
    assert_eq!(run(&["solve", &cfg], tmp.path()).status.code(), Some(3));
}

#[test]
fn analyze_reports_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "iso.toml", CONFIG);
    let out = run(&["analyze", &cfg, "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("h-ellipticity 0.250000"), "{text}");
    assert!(tmp.path().join("res/iso-analysis.json").exists());
}

#[test]
fn preset_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["table1", "--scale", "0.5", "--seed", "2", "--out", "res"])
        .env("SESOP_WORKERS", "2")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("res/table1");
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
    let cmp = std::fs::read_to_string(dir.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().next().unwrap().split(',').count(), 7);
    let bad = run(&["table1", "--scale", "0.3"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        sesop_bench::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 3);
}
