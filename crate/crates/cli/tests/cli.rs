use std::path::Path;
use std::process::{Command, Output};

fn sepmp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepmp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SEPMP_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(sepmp(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(sepmp(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(sepmp(&["verify"], tmp.path()).status.code(), Some(1));
}

#[test]
fn poisson_check_reports_mean_and_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = sepmp(&["verify", "poisson", "--paths", "100000", "--seed", "42"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["seed"], 42);
    assert!(s["results"]["z_mean"].as_f64().unwrap().abs() <= 3.0);
    assert!(s["results"]["z_variance"].as_f64().unwrap().abs() <= 3.0);
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    assert!(s["version"].as_str().unwrap().starts_with('v'));
    assert!(s["wall_time"].as_f64().unwrap() >= 0.0);
    assert!(out.join("poisson.toml").exists());
}

#[test]
fn negative_beta_is_a_validation_error_naming_beta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"model": {"lambda0": 1.0, "drift": {"kind": "zero"}, "beta": -1.0}}"#);
    let out = tmp.path().join("run");
    let o = sepmp(&["--config", &cfg, "simulate"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"grid": {"horizon": 1.0, "steps": 10}}"#);
    let o = sepmp(&["--config", &cfg, "simulate"], &tmp.path().join("run"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("steps"));
}

#[test]
fn optimal_curve_starts_at_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = sepmp(&["logutil", "solve", "--paths", "20", "--inner-paths", "8"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("pi_hat.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,pi_hat"));
    assert_eq!(lines.next(), Some("0.0,0.5"));
    assert!(out.join("first_order.toml").exists());
    assert!(out.join("traces.csv").exists());
}

#[test]
fn simulate_writes_event_and_state_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = sepmp(&["simulate", "--paths", "5", "--mode", "atjump"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.starts_with("path_id,event_index,time,mark,intensity_pre_jump,intensity_post_jump\n"));
    let states = std::fs::read_to_string(out.join("states.csv")).unwrap();
    let mut rows = states.lines();
    assert_eq!(rows.next(), Some("path_id,time,X_pre,X_post,lambda,N,U"));
    assert_eq!(rows.next(), Some("0,0.0,1.0,1.0,1.0,0,0.0"));
    let cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["kernel"]["mode"], "atjump");
}

#[test]
fn event_cap_is_a_simulation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"mc": {"paths": 100, "max_events": 1}}"#);
    let o = sepmp(&["--config", &cfg, "logutil", "compare"], &tmp.path().join("run"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("path"));
}

#[test]
fn flagged_statistics_exit_two() {
    // The central difference at the optimum carries an O(y²) bias that the
    // paired estimator resolves, so the gradient check flags it.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = sepmp(&["gradient", "--paths", "500"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&out)["status"], "flagged");
    assert!(out.join("gradient.toml").exists());
}

#[test]
fn martingale_report_covers_both_markers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = sepmp(&["verify", "martingale", "--paths", "10000"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: toml::Table = std::fs::read_to_string(out.join("martingale.toml")).unwrap().parse().unwrap();
    assert!(doc.get("linear").is_some());
    assert!(doc.get("squared").is_some());
}

#[test]
fn too_few_martingale_paths_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sepmp(&["verify", "martingale", "--paths", "100"], &tmp.path().join("run"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut tables = Vec::new();
    for _ in 0..2 {
        assert_eq!(sepmp(&["simulate", "--paths", "50", "--seed", "7"], &out).status.code(), Some(0));
        tables.push((std::fs::read(out.join("events.csv")).unwrap(), std::fs::read(out.join("states.csv")).unwrap()));
    }
    assert_eq!(tables[0], tables[1]);
}
