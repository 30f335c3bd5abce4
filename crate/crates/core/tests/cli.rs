use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nematic_colloid::harness::{fit_scaling, read_records, run_trials, Config, SweepSpec, CSV_HEADER};
use nematic_colloid::kappa;

fn colloid(args: &[&str], threads_env: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_colloid"));
    c.args(args).env_remove("COLLOID_THREADS");
    if let Some(t) = threads_env {
        c.env("COLLOID_THREADS", t);
    }
    c.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"sweep": {"points": [{"xi": 0.08, "eta": 0.4}, {"xi": 0.06, "eta": 0.3}], "inits": ["layer", "trial"]},
 "output": {"formats": ["csv", "json"]}}"#;

#[test]
fn sweep_succeeds_and_csv_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("runs").to_string_lossy().into_owned();
    let a = colloid(&["sweep", "--config", &cfg, "--out", &out, "--preset", "fast", "--threads", "1"], None);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = colloid(&["sweep", "--config", &cfg, "--out", &out, "--preset", "fast"], Some("3"));
    assert_eq!(b.status.code(), Some(0), "{}", String::from_utf8_lossy(&b.stderr));
    let csv1 = fs::read_to_string(dir.path().join("runs/run-0001/records.csv")).unwrap();
    let csv2 = fs::read_to_string(dir.path().join("runs/run-0002/records.csv")).unwrap();
    assert_eq!(csv1, csv2);
    assert_eq!(csv1.lines().next(), Some(CSV_HEADER));
    assert_eq!(csv1.lines().count(), 1 + 4);
}

#[test]
fn report_reemits_and_rejects_unknown_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sweep": {"points": [{"xi": 0.08, "eta": 0.4}]}, "output": {"formats": ["csv"]}}"#);
    let out = dir.path().join("runs").to_string_lossy().into_owned();
    let t = colloid(&["trial", "--config", &cfg, "--out", &out, "--preset", "fast"], None);
    assert_eq!(t.status.code(), Some(0), "{}", String::from_utf8_lossy(&t.stderr));
    let run = dir.path().join("runs/run-0001");
    let run_s = run.to_string_lossy().into_owned();
    let original = fs::read_to_string(run.join("records.csv")).unwrap();

    let again = dir.path().join("again").to_string_lossy().into_owned();
    let r = colloid(&["report", &run_s, "--format", "csv", "--format", "svg", "--out", &again], None);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("again/records.csv")).unwrap(), original);
    assert!(dir.path().join("again/eta_energy_vs_xi.svg").exists());

    let bad = colloid(&["report", &run_s, "--format", "xlsx"], None);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("xlsx"));
}

#[test]
fn partial_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // lambda = 1 leaves no room for the trial's layer, so that point fails
    let cfg = write_config(dir.path(), r#"{"sweep": {"points": [{"xi": 0.08, "eta": 0.4}, {"xi": 0.1, "eta": 0.1}]}, "output": {"formats": ["csv"]}}"#);
    let out = dir.path().join("runs").to_string_lossy().into_owned();
    let t = colloid(&["trial", "--config", &cfg, "--out", &out, "--preset", "fast"], None);
    assert_eq!(t.status.code(), Some(2), "{}", String::from_utf8_lossy(&t.stdout));
    let csv = fs::read_to_string(dir.path().join("runs/run-0001/records.csv")).unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",failed")));
    assert!(csv.lines().any(|l| l.ends_with(",ok")));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sweep": {"pionts": []}}"#);
    assert_eq!(colloid(&["sweep", "--config", &cfg], None).status.code(), Some(1));
    assert_eq!(colloid(&["minimize", "--xi", "0.1"], None).status.code(), Some(1));
    let missing = dir.path().join("nope").to_string_lossy().into_owned();
    assert_eq!(colloid(&["report", &missing], None).status.code(), Some(1));
}

#[test]
fn seed_flag_reaches_the_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sweep": {"points": [{"xi": 0.08, "eta": 0.4}]}, "output": {"formats": []}}"#);
    let out = dir.path().join("runs").to_string_lossy().into_owned();
    let t = colloid(&["trial", "--config", &cfg, "--out", &out, "--seed", "77", "--preset", "fast"], None);
    assert_eq!(t.status.code(), Some(0));
    let embedded = Config::load(&dir.path().join("runs/run-0001/config.json")).unwrap();
    assert_eq!(embedded.sweep.seed, 77);
    assert_eq!(embedded.grid.preset, nematic_colloid::harness::Preset::Fast);
}

fn trial_limit(schedule: &str) -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::from_json(&format!(r#"{{"sweep": {{"schedule": {schedule}}}}}"#)).unwrap();
    cfg.output.dir = dir.path().to_path_buf();
    let out = run_trials(&SweepSpec::from_config(&cfg).unwrap(), None).unwrap();
    assert!(out.all_records_ok());
    let back = read_records(&out.run_dir.unwrap().join("records.json")).unwrap();
    assert_eq!(back, out.records);
    let fit = fit_scaling(&out.records).unwrap().limit.unwrap();
    assert!((fit.reference - 2.0 * std::f64::consts::PI * kappa()).abs() < 1e-12);
    fit.rel_gap
}

#[test]
fn trial_energy_extrapolates_to_two_pi_kappa() {
    let linear = trial_limit(r#"{"kind": "linear", "ratio": 10, "xi": [0.01, 0.005, 0.0025]}"#);
    assert!(linear.abs() <= 0.05, "linear schedule gap {linear}");
    let log = trial_limit(r#"{"kind": "log", "c": 1, "p": 2, "xi": [0.01, 0.003, 0.001]}"#);
    assert!(log.abs() <= 0.05, "log schedule gap {log}");
}

#[test]
fn readme_config_parses() {
    let readme = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let block = readme.split("```json\n").nth(1).unwrap().split("```").next().unwrap();
    let cfg = Config::from_json(block).unwrap();
    assert_eq!(cfg.points().len(), 3);
    assert!(SweepSpec::from_config(&cfg).is_ok());
}
