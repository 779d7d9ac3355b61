use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn resolvent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resolvent"))
        .args(args)
        .env("RESOLVENT_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, file: &str, cfg: &Value) -> String {
    let path = dir.join(file);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn pdhg(name: &str) -> Value {
    json!({
        "name": name,
        "problem": {"generated": {"generator": "lasso", "form": "composite", "dim": 20, "seed": 5}},
        "algorithm": {"name": "pdhg_mp", "sigma": 0.5, "tau": 0.5},
        "run": {"max_iter": 200, "seed": 1},
        "checks": ["picard_sequential", "firm_nonexpansive", "twin"]
    })
}

fn example_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    out.sort();
    out
}

#[test]
fn catalog_lists_every_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = resolvent(dir.path(), &["catalog"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("rate formulas (12):"));
    assert!(text.contains("problem generators (3):"));
    assert!(text.contains("relaxed_admm -> relaxed ADMM"));
    for name in ["picard_sequential", "km_r_linear", "strong_objective_rlinear", "twin", "kkt", "basis_pursuit"] {
        assert!(text.contains(name), "catalog misses {name}");
    }
}

#[test]
fn example_configs_validate() {
    let dir = tempfile::tempdir().unwrap();
    let configs = example_configs();
    assert!(configs.len() >= 5);
    for cfg in configs {
        let out = resolvent(dir.path(), &["validate", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", cfg.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn run_writes_trace_sidecar_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.json", &pdhg("outputs"));
    let out = resolvent(dir.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = std::fs::read_to_string(dir.path().join("outputs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201 + 1, "header plus one row per iterate");
    let sidecar: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("outputs.meta.json")).unwrap()).unwrap();
    assert!(sidecar.is_object());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("outputs.report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["algorithm"], "pdhg_mp");
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn identical_configs_give_identical_traces() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let cfg = write(d.path(), "a.json", &pdhg("same"));
        assert_eq!(resolvent(d.path(), &["run", &cfg]).status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("same.csv")).unwrap();
    assert_eq!(read(d1.path()), read(d2.path()));
}

#[test]
fn parallel_batch_matches_sequential_runs() {
    let (seq, par) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let names = ["b0", "b1", "b2", "b3"];
    for d in [&seq, &par] {
        for n in names {
            write(d.path(), &format!("{n}.json"), &pdhg(n));
        }
    }
    for n in names {
        let cfg = seq.path().join(format!("{n}.json"));
        assert_eq!(resolvent(seq.path(), &["run", cfg.to_str().unwrap()]).status.code(), Some(0));
    }
    let cfgs: Vec<String> =
        names.iter().map(|n| par.path().join(format!("{n}.json")).to_str().unwrap().to_owned()).collect();
    let mut args = vec!["run", "--jobs", "4"];
    args.extend(cfgs.iter().map(String::as_str));
    let out = resolvent(par.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for n in names {
        let f = format!("{n}.csv");
        assert_eq!(std::fs::read(seq.path().join(&f)).unwrap(), std::fs::read(par.path().join(&f)).unwrap());
    }
}

#[test]
fn duplicate_names_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", &pdhg("twice"));
    let b = write(dir.path(), "b.json", &pdhg("twice"));
    let out = resolvent(dir.path(), &["run", &a, &b]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("twice"));
    assert!(!dir.path().join("twice.csv").exists());
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pdhg("bad");
    cfg["algorithm"]["sigma"] = json!("half");
    let path = write(dir.path(), "bad.json", &cfg);
    let out = resolvent(dir.path(), &["validate", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("algorithm"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_check_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pdhg("unknown");
    cfg["checks"] = json!(["picard_sequential", "no_such_check"]);
    let path = write(dir.path(), "u.json", &cfg);
    let out = resolvent(dir.path(), &["run", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("no_such_check"));
}

#[test]
fn error_outranks_violation_in_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", &pdhg("good"));
    let mut bad = pdhg("broken");
    bad["algorithm"]["sigma"] = json!(50.0);
    let bad = write(dir.path(), "broken.json", &bad);
    let out = resolvent(dir.path(), &["run", "--negative-control", &good, &bad]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("good: violations in picard_sequential"), "{text}");
    assert!(text.contains("broken: error"), "{text}");
}

#[test]
fn missing_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = resolvent(dir.path(), &["run", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
