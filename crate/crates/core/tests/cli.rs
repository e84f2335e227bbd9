use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mlglm::cli::{load_config, run_config, Overrides, RunConfig};
use mlglm::recursion::compute_rho_default;
use mlglm::{Error, ErrorCategory};
use serde_json::{json, Value};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn base(task: &str, out: &Path) -> Value {
    json!({
        "schema_version": 1,
        "task": task,
        "model": {
            "prior": { "atoms": [ { "value": -1.0, "weight": 0.5 }, { "value": 1.0, "weight": 0.5 } ] },
            "layers": [ { "alpha": 1.0, "activation": { "kind": "scaled-tanh", "kappa": 1.0 } } ],
            "beta": 1.0
        },
        "seed": 3,
        "output": { "dir": out }
    })
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlglm"))
}

#[test]
fn rho_task_reports_the_recursion() {
    let dir = tempfile::tempdir().unwrap();
    let overrides = Overrides {
        out: Some(dir.path().to_path_buf()),
        set: vec!["params.empirical.replications=20".into(), "params.empirical.n=50".into()],
        ..Default::default()
    };
    let config = load_config(&config_path("rho.json"), &overrides).unwrap();
    let report = run_config(&config).unwrap();
    let rho = compute_rho_default(&config.model).unwrap();
    let got: Vec<f64> = serde_json::from_value(report.results["rho"].clone()).unwrap();
    assert_eq!(got[0], 1.0);
    assert_eq!(got, rho.values);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn bad_alpha_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base("rho", dir.path());
    v["model"]["layers"][0]["alpha"] = json!(-1.0);
    let err = RunConfig::from_value(v.clone()).unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Config);
    assert!(err.to_string().contains("layers[0].alpha"), "{err}");

    let path = dir.path().join("bad.json");
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = bin().arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let msg: Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(msg["category"], "config");
    assert!(msg["message"].as_str().unwrap().contains("layers[0].alpha"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base("rho", dir.path());
    v["model"]["layers"][0]["activation"]["gain"] = json!(2.0);
    match RunConfig::from_value(v).unwrap_err() {
        Error::Invalid { path, .. } => assert!(path.contains("layers[0].activation"), "{path}"),
        other => panic!("{other}"),
    }
    let mut v = base("rho", dir.path());
    v["extra"] = json!(1);
    assert!(RunConfig::from_value(v).is_err());
    let mut v = base("rho", dir.path());
    v["schema_version"] = json!(2);
    assert!(RunConfig::from_value(v).is_err());
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::from_value(base("rho", dir.path())).unwrap();
    let report = run_config(&config).unwrap();
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let echoed: Value = serde_json::from_str(&text).unwrap();
    let again = RunConfig::from_value(echoed["config"].clone()).unwrap();
    assert_eq!(again, config);
    assert_eq!(again, report.config);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let overrides = Overrides {
        seed: Some(99),
        out: Some(dir.path().to_path_buf()),
        set: vec!["model.beta=0.25".into(), "model.layers[0].activation.kappa=2".into()],
    };
    let c = load_config(&config_path("saddle.json"), &overrides).unwrap();
    assert_eq!(c.seed, 99);
    assert_eq!(c.model.beta, 0.25);
    assert_eq!(c.model.layers[0].activation.kappa, 2.0);
    assert_eq!(c.output.dir, dir.path());
    let bad = Overrides { set: vec!["model.layers[7].alpha=1".into()], ..Default::default() };
    assert!(load_config(&config_path("saddle.json"), &bad).is_err());
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_reproduce_csv_bytes() {
    let mut v = base("simulate", Path::new("unused"));
    v["params"] = json!({ "simulate": { "n": [4, 6], "replications": 8 } });
    let mut t = base("psi-table", Path::new("unused"));
    t["params"] = json!({
        "orders": { "outer": 12, "inner": 16, "prior": 40 },
        "psi_table": { "h1_cells": 3, "h2_cells": 3 }
    });
    for v in [v, t] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let mut c = v.clone();
            c["output"]["dir"] = json!(d.path());
            run_config(&RunConfig::from_value(c).unwrap()).unwrap();
        }
        let (x, y) = (csv_bytes(a.path()), csv_bytes(b.path()));
        assert!(!x.is_empty());
        assert_eq!(x, y);
    }
}

#[test]
fn binary_runs_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--config")
        .arg(config_path("rho.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--threads", "1", "--set", "params.empirical.replications=10", "--set", "params.empirical.n=20"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["rho"][0], 1.0);
}

#[test]
fn nonconvergence_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base("saddle", dir.path());
    v["params"] = json!({
        "orders": { "outer": 12, "inner": 16, "prior": 40 },
        "methods": ["fixed-point"],
        "fixed_point": { "restarts": 1 }
    });
    v["model"]["beta"] = json!(2.0);
    let path = dir.path().join("c.json");
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = bin()
        .arg("--config")
        .arg(&path)
        .args(["--set", "params.fixed_point.max_iter=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
