use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use shmf_harness::ExperimentConfig;

fn shmf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shmf")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, v: &Value) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn small(initial: Value, noise: Value) -> Value {
    json!({
        "schema_version": 1,
        "basis": {"n_modes": 32},
        "solver": {"blowup_grad_threshold": 100.0, "snapshot_every": 1},
        "noise": noise,
        "initial": initial,
        "mc": {"n_paths": 6, "seed": 9, "t_star": 0.1, "workers": 2},
        "output": {"dir": "out", "write_trajectories": true}
    })
}

#[test]
fn shipped_default_config_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let cfg = ExperimentConfig::from_file(&path).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn malformed_configs_exit_1_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small(json!({"kind": "zero"}), json!({"kind": "off"}));
    v["mc"]["n_pathz"] = json!(3);
    let cfg = write_config(dir.path(), &v);
    let o = shmf(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mc") && err.contains("n_pathz"), "{err}");

    let v = small(json!({"kind": "zero"}), json!({"kind": "power_law", "amplitude": 0.1, "exponent": 2.9, "beta_target": 2.5}));
    let cfg = write_config(dir.path(), &v);
    let o = shmf(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise.exponent"));

    let mut v = small(json!({"kind": "chi_k", "k": 8.0}), json!({"kind": "off"}));
    v["solver"]["beta"] = json!(1.5);
    let cfg = write_config(dir.path(), &v);
    let o = shmf(&["blowup-prob", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver.beta"));

    let o = shmf(&["simulate", "--config", "missing.json"], dir.path());
    assert_eq!(code(&o), 1);
    let o = shmf(&["no-such-command"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn trivial_run_has_zero_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small(json!({"kind": "zero"}), json!({"kind": "off"})));
    let o = shmf(&["simulate", "--config", &cfg, "--quiet"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next().unwrap(), "t,dt,norm_beta,grad0,energy,status");
    let mut n = 0;
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        for c in &cols[2..5] {
            assert_eq!(c.parse::<f64>().unwrap(), 0.0, "{row}");
        }
        n += 1;
    }
    assert!(n > 1);
    assert!(csv.trim_end().ends_with("completed"));
}

#[test]
fn stalls_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small(json!({"kind": "chi_k", "k": 1.0}), json!({"kind": "off"}));
    v["solver"]["max_steps"] = json!(3);
    let cfg = write_config(dir.path(), &v);
    let o = shmf(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = shmf(&["blowup-prob", "--config", &cfg, "--paths", "2"], dir.path());
    assert_eq!(code(&o), 2);
    let summary = fs::read_to_string(dir.path().join("out/blowup_prob.jsonl")).unwrap();
    let last: Value = serde_json::from_str(summary.lines().last().unwrap()).unwrap();
    assert_eq!(last["n_stalled"], json!(2));
    assert_eq!(last["n_paths"], json!(0));
}

#[test]
fn blowup_prob_is_reproducible_and_overridable() {
    let dir = tempfile::tempdir().unwrap();
    let noise = json!({"kind": "power_law", "amplitude": 0.1, "exponent": 3.5, "beta_target": 2.5});
    let cfg = write_config(dir.path(), &small(json!({"kind": "chi_k", "k": 8.0}), noise));
    let read_all = |d: &Path| {
        let mut files: Vec<_> = walk(d);
        files.sort();
        files.into_iter().map(|p| (p.strip_prefix(d).unwrap().to_owned(), fs::read(&p).unwrap())).collect::<Vec<_>>()
    };
    assert_eq!(code(&shmf(&["blowup-prob", "--config", &cfg, "--out", "a", "--quiet"], dir.path())), 0);
    assert_eq!(code(&shmf(&["blowup-prob", "--config", &cfg, "--out", "b", "--quiet"], dir.path())), 0);
    let (a, b) = (read_all(&dir.path().join("a")), read_all(&dir.path().join("b")));
    assert_eq!(a.len(), 7);
    assert_eq!(a, b);
    let o = shmf(&["blowup-prob", "--config", &cfg, "--out", "c", "--seed", "10", "--paths", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("c/blowup_prob.jsonl")).unwrap();
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["seed"], json!(10));
    assert_eq!(first["n_paths"], json!(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("p_hat"));
}

#[test]
fn verify_and_spectrum_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let o = shmf(&["verify", "--out", "v"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("v/verify.jsonl")).unwrap();
    for line in text.lines().filter(|l| l.contains("\"check\"")) {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], json!(true), "{line}");
    }
    let o = shmf(&["spectrum"], dir.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().count(), 65);
    let x1: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((x1 - 3.8317059702075123).abs() < 1e-14);
}

fn walk(d: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(d).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
