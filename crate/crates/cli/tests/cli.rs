mod common;

use std::path::PathBuf;
use std::sync::OnceLock;

use common::{run, stdout, verify_value, MUTATIONS};
use serde_json::Value;

struct Built {
    _dir: tempfile::TempDir,
    path: PathBuf,
}

/// A two-stage toy construction shared by the tests.
fn built() -> &'static Built {
    static B: OnceLock<Built> = OnceLock::new();
    B.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("certs.json");
        let o = run(&["construct", "--stages", "2", "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "construct failed: {}", String::from_utf8_lossy(&o.stderr));
        Built { _dir: dir, path }
    })
}

fn certs() -> Value {
    serde_json::from_str(&std::fs::read_to_string(&built().path).unwrap()).unwrap()
}

#[test]
fn fresh_certificates_verify_with_replay() {
    let o = run(&["verify", built().path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("OK"));
}

#[test]
fn single_field_mutations_are_rejected_with_their_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let base = certs();
    let o = verify_value(&base, dir.path(), "base.json");
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for (name, invariant, mutate) in MUTATIONS {
        let mut v = base.clone();
        mutate(&mut v);
        assert_ne!(v, base, "{name} changed nothing");
        let o = verify_value(&v, dir.path(), &format!("{name}.json"));
        let out = stdout(&o);
        assert_eq!(o.status.code(), Some(1), "{name}: {out}");
        assert!(out.contains(&format!(" {invariant}:")), "{name} should violate {invariant}:\n{out}");
    }
}

#[test]
fn empty_and_malformed_files_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("empty.json", ""), ("bad.json", "{not json"), ("array.json", "[]")] {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        let o = run(&["verify", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
    }
    let o = run(&["verify", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["construct", "--precision", "16"]).status.code(), Some(2));
    assert_eq!(run(&["construct", "--eta0", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["mechanism", "--variant", "IV", "--omega", "1/2,1/4,1/8", "--z", "0.5,0.5,0.25"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn zero_stage_build_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c0.json");
    let o = run(&["construct", "--stages", "0", "--out", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["stages"].as_array().unwrap().len(), 1);
    assert_eq!(v["config"]["stages"], 0);
    assert_eq!(run(&["verify", p.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn config_file_and_flags_are_embedded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"stages": 0, "params": {"gamma": "0.25"}}"#).unwrap();
    let p = dir.path().join("c.json");
    let o = run(&["construct", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["config"]["params"]["gamma"], "0.25");
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["params"]["alpha"], "2");
}

#[test]
fn mechanism_command_reproduces_the_toy_run() {
    let o = run(&["mechanism", "--variant", "II", "--omega", "1/2,1/4,1/8", "--z", "0.5,0.5,0.25"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["N"], "8");
    assert_eq!(v["result"]["final"][1]["magnitude"], "0.25");
    assert_eq!(v["config"]["mode"]["mode"], "toy");
}

#[test]
fn mechanism_hypothesis_failure_exits_nonzero() {
    let o = run(&["mechanism", "--variant", "I", "--omega", "1/4,1/8,1/2", "--z", "0.5,0,0.25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("HYPOTHESIS_VIOLATION"));
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|t| t.parse().unwrap()).collect()).collect()
}

#[test]
fn trajectory_of_a_pure_rotation_keeps_its_magnitudes() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("rot.json");
    std::fs::write(&prog, r#"{"omega": ["1/3", "1/5", "1/7"], "bumps": []}"#).unwrap();
    let o = run(&["trajectory", "--program", prog.to_str().unwrap(), "--z", "0.5,0.25,0.125", "--steps", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("m,x1,y1,x2,y2,x3,y3,sup_norm\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 20);
    for r in &rows {
        for (i, want) in [0.5, 0.25, 0.125].iter().enumerate() {
            assert!((r[1 + 2 * i].hypot(r[2 + 2 * i]) - want).abs() < 1e-12);
        }
    }
    let o = run(&["trajectory", "--program", prog.to_str().unwrap(), "--z", "0.5,0.25,0.125", "--steps", "0"]);
    assert_eq!(stdout(&o), "m,x1,y1,x2,y2,x3,y3,sup_norm\n");
}

#[test]
fn trajectory_of_the_toy_map_decays_stepwise() {
    let dir = tempfile::tempdir().unwrap();
    let mech = dir.path().join("mech.json");
    let o = run(&["mechanism", "--variant", "II", "--omega", "1/2,1/4,1/8", "--z", "0.5,0.5,0.25", "--out", mech.to_str().unwrap()]);
    assert!(o.status.success());
    let o = run(&["trajectory", "--program", mech.to_str().unwrap(), "--z", "0.5,0.5,0.25", "--steps", "16"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    let x2: Vec<f64> = rows.iter().map(|r| r[3].hypot(r[4])).collect();
    assert!(x2.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!((x2[7] - 0.25).abs() < 1e-9);
    assert!(x2.iter().any(|&m| (m - 0.5).abs() < 1e-12));
}

#[test]
fn budget_command_prints_constants() {
    let o = run(&["budget", "--n", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["constants"]["eps_compose"].is_string());
}
