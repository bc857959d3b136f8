use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etdlab::core::scenarios;
use etdlab::spec_file::{self, spec_to_value};
use serde_json::{json, Value};

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn etdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etdlab")).args(args).env_remove("ETDLAB_THREADS").output().unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn committed_specs_round_trip() {
    for (file, built) in [("specs/reference.json", scenarios::reference()), ("specs/divergence.json", scenarios::divergence())] {
        let path = repo(file);
        let loaded = spec_file::load_spec(&path).unwrap();
        assert_eq!(loaded, built, "{file}");
        assert_eq!(spec_file::spec_to_string(&loaded), fs::read_to_string(&path).unwrap(), "{file}");
    }
}

#[test]
fn verify_reference_passes() {
    let o = etdlab(&["verify", repo("specs/reference.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("theta_star: present"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_zero_interest_passes_without_theta() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = spec_to_value(&scenarios::reference());
    v["interest"] = json!([0.0, 0.0, 0.0, 0.0, 0.0]);
    let p = write_json(dir.path(), "zero.json", &v);
    let o = etdlab(&["verify", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("theta_star: absent"));
}

#[test]
fn verify_rejects_substochastic_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = spec_to_value(&scenarios::reference());
    v["transition"][1][0] = json!([0.0, 0.2, 0.7, 0.0, 0.0]);
    let p = write_json(dir.path(), "bad.json", &v);
    let o = etdlab(&["verify", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn unreadable_specs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(etdlab(&["verify", missing.to_str().unwrap()]).status.code(), Some(2));
    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{\"n_states\": 2,").unwrap();
    assert_eq!(etdlab(&["verify", garbled.to_str().unwrap()]).status.code(), Some(2));
    let mut v = spec_to_value(&scenarios::reference());
    v.as_object_mut().unwrap().remove("behavior_policy");
    let p = write_json(dir.path(), "nobehavior.json", &v);
    let o = etdlab(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("policies.behavior"));
}

#[test]
fn analyze_prints_oracle_quantities() {
    let o = etdlab(&["analyze", repo("specs/divergence.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["validation"]["passed"], json!(true));
    assert!(doc["solution"]["theta_star"].is_array());
    assert_eq!(doc["td_offpolicy"]["mean_update_stable"], json!(false));
}

fn small_config(dir: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "spec_path": repo("specs/reference.json"),
        "horizon": 3000,
        "seeds": [4, 1, 7],
        "checkpoints": [100, 1000],
        "output_dir": "out",
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    write_json(dir, "cfg.json", &cfg)
}

#[test]
fn run_is_byte_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = small_config(a.path(), json!({"algorithm": "elstd"}));
    let pb = small_config(b.path(), json!({"algorithm": "elstd"}));
    assert!(etdlab(&["--threads", "1", "run", pa.to_str().unwrap()]).status.success());
    assert!(etdlab(&["--threads", "3", "run", pb.to_str().unwrap()]).status.success());
    let csv_a = fs::read(a.path().join("out/runs.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("out/runs.csv")).unwrap());
    let summary = |d: &Path| -> Value {
        let mut v: Value = serde_json::from_slice(&fs::read(d.join("out/summary.json")).unwrap()).unwrap();
        v["config"]["output_dir"] = Value::Null;
        v
    };
    assert_eq!(summary(a.path()), summary(b.path()));
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("seed,t,err_theta_inf,err_C_inf,err_b_inf,trace_norm,aborted\n"));
    // three seeds, checkpoints 0, 100, 1000 and the horizon
    assert_eq!(text.lines().count(), 1 + 3 * 4);
}

#[test]
fn non_harmonic_stepsize_needs_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_config(dir.path(), json!({"schedule": {"kind": "power", "a": 1.0, "c": 0.7}}));
    let o = etdlab(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experimental_schedule"));
    let p = small_config(dir.path(), json!({"schedule": {"kind": "power", "a": 1.0, "c": 0.7}, "experimental_schedule": true}));
    let o = etdlab(&["run", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not O(1/t)"));
}

#[test]
fn compare_writes_prefixed_csv_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_config(
        dir.path(),
        json!({"spec_path": repo("specs/divergence.json"), "algorithms": ["etd", "td_offpolicy"], "trajectory_dump": 50}),
    );
    let o = etdlab(&["compare", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    assert!(csv.starts_with("algorithm,seed,t,"));
    assert!(csv.lines().any(|l| l.starts_with("td_offpolicy,")));
    let traj = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,s,a,s_next,reward,rho"));
    assert_eq!(traj.lines().count(), 51);
}

#[test]
fn sweep_runs_each_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "spec_path": repo("specs/reference.json"),
        "horizon": 2000,
        "seeds": [0, 1],
        "output_dir": "sweep",
        "variants": [
            {"name": "fast", "schedule": {"kind": "harmonic", "c1": 10.0, "c2": 100.0}},
            {"name": "slow", "schedule": {"kind": "harmonic", "c1": 1.0, "c2": 100.0}},
        ],
    });
    let p = write_json(dir.path(), "sweep.json", &cfg);
    let o = etdlab(&["sweep", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["fast", "slow"] {
        assert!(dir.path().join("sweep").join(name).join("runs.csv").exists());
    }
    let index: Value = serde_json::from_slice(&fs::read(dir.path().join("sweep/sweep.json")).unwrap()).unwrap();
    assert_eq!(index.as_array().unwrap().len(), 2);
    assert_eq!(index[1]["name"], json!("slow"));
}

#[test]
fn example_configs_parse_and_check() {
    for entry in fs::read_dir(repo("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        if v.get("variants").is_some() {
            continue;
        }
        let cfg = etdlab::config::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let algs = if cfg.algorithms.is_empty() { vec![cfg.algorithm] } else { cfg.algorithms.clone() };
        cfg.check(&algs).unwrap();
        cfg.load_spec().unwrap();
    }
}
