use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(kind: &str, config: &str, dir: &Path) -> (i32, Value) {
    let cfg = dir.join(format!("{kind}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{kind}"));
    let status = Command::new(env!("CARGO_BIN_EXE_dbm-edge-lab"))
        .args([kind, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"])
        .output()
        .unwrap();
    let code = status.status.code().unwrap();
    let report = fs::read_to_string(out.join("report.json"))
        .map(|t| serde_json::from_str(&t).unwrap())
        .unwrap_or(Value::Null);
    (code, report)
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("sample-gbe", r#"{"n": 4, "unknown": 1}"#, dir.path()).0, 2);
    assert_eq!(run("run-dbm", r#"{"n": 4}"#, dir.path()).0, 2);
    assert_eq!(run("run-dbm", r#"{"n": 4, "duration": 1, "dt_base": -1}"#, dir.path()).0, 2);
    assert_eq!(run("sample-gbe", "not json", dir.path()).0, 2);
    assert!(!dir.path().join("out-run-dbm").exists());
}

#[test]
fn one_particle_variance_is_two_over_beta() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run("sample-gbe", r#"{"n": 1, "beta": 2, "seeds": {"start": 0, "count": 100000}}"#, dir.path());
    assert_eq!(code, 0);
    let v = report["aggregate"]["lambda_1_variance"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 0.01, "{v}");
}

#[test]
fn equal_sizes_couple_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"n_list": [256, 256], "duration": 0.1, "t_burn": 0.1, "dt_base": 0.001, "seeds": {"start": 3, "count": 2}}"#;
    let (code, report) = run("run-coupled", cfg, dir.path());
    assert_eq!(code, 0);
    let sup = &report["aggregate"]["report"]["sup_diff"][0];
    assert!(sup.as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"n": 24, "beta": 1, "duration": 0.2, "dt_base": 0.001, "decimation": 10, "seeds": {"start": 5, "count": 3}}"#;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    assert_eq!(run("run-dbm", cfg, &a).0, 0);
    assert_eq!(run("run-dbm", cfg, &b).0, 0);
    for f in ["trajectories.csv", "config.json"] {
        let x = fs::read(a.join("out-run-dbm").join(f)).unwrap();
        let y = fs::read(b.join("out-run-dbm").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn failed_replicas_keep_the_others() {
    // a bare window without the confinement term lets particle K reach γ_c on some seeds
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"n": 64, "duration": 1, "dt_base": 0.001, "closure": "bare", "confinement_term": false,
                  "seeds": {"start": 0, "count": 20}}"#;
    let (code, report) = run("run-window", cfg, dir.path());
    assert_eq!(code, 1);
    let reps = report["replicas"].as_array().unwrap();
    let ok = reps.iter().filter(|r| r["ok"] == true).count();
    assert!(ok > 0 && ok < reps.len());
    let csv = fs::read_to_string(dir.path().join("out-run-window/trajectories.csv")).unwrap();
    let seeds: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds.len(), ok);
}
