use std::path::PathBuf;

use etdlab::config::{Algorithm, ExperimentConfig};
use etdlab::experiment::{self, records_csv};
use etdlab::stats;
use serde_json::json;

fn config(extra: serde_json::Value) -> ExperimentConfig {
    let mut v = json!({
        "spec_path": PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs/reference.json"),
        "horizon": 5000,
        "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        "checkpoints": [100, 1000],
        "output_dir": "unused",
    });
    for (k, val) in extra.as_object().unwrap() {
        v[k] = val.clone();
    }
    serde_json::from_value(v).unwrap()
}

#[test]
fn zero_horizon_reports_initial_error() {
    let cfg = config(json!({"horizon": 0, "checkpoints": []}));
    let out = experiment::execute(&cfg, &[Algorithm::Etd], 1).unwrap();
    let theta_inf = out.summary.normalizers.theta_star_inf.unwrap();
    for rec in out.records_for(Algorithm::Etd) {
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].t, 0);
        assert_eq!(rec.rows[0].err_theta_inf, Some(theta_inf));
    }
}

#[test]
fn summaries_do_not_depend_on_seed_order() {
    let a = experiment::execute(&config(json!({})), &[Algorithm::Etd, Algorithm::Elstd], 2).unwrap();
    let mut reversed = config(json!({}));
    reversed.seeds.reverse();
    let b = experiment::execute(&reversed, &[Algorithm::Etd, Algorithm::Elstd], 2).unwrap();
    assert_eq!(a.summary.algorithms, b.summary.algorithms);
    assert_eq!(a.summary.normalizers, b.summary.normalizers);
}

#[test]
fn shared_streams_give_identical_traces() {
    let out = experiment::execute(&config(json!({})), &[Algorithm::Etd, Algorithm::Elstd, Algorithm::EtdConstrained], 1);
    // etd_constrained without a radius is a configuration error
    assert!(out.is_err());
    let out = experiment::execute(&config(json!({"radius_factor": 2.0})), &[Algorithm::Etd, Algorithm::Elstd, Algorithm::EtdConstrained], 1).unwrap();
    for per_seed in &out.records {
        let norms: Vec<Vec<Option<f64>>> = per_seed.iter().map(|r| r.rows.iter().map(|row| row.trace_norm).collect()).collect();
        assert!(norms.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn small_radius_is_flagged() {
    let out = experiment::execute(&config(json!({"constraint_radius": 1.0})), &[Algorithm::EtdConstrained], 1).unwrap();
    assert!(out.summary.warnings.iter().any(|w| w.contains("radius below")), "{:?}", out.summary.warnings);
    let s = out.summary_for(Algorithm::EtdConstrained).unwrap();
    assert_eq!(s.constraint_radius, Some(1.0));
    assert!(matches!(s.last_active_projection, Some(Some(_))));
    let quiet = experiment::execute(&config(json!({"radius_factor": 2.0})), &[Algorithm::EtdConstrained], 1).unwrap();
    assert!(quiet.summary.warnings.is_empty());
}

#[test]
fn singular_problems_refuse_parameter_learners() {
    let cfg = config(json!({"spec_path": serde_json::Value::Null, "scenario": {"name": "one_state_ratio"}}));
    let err = experiment::execute(&cfg, &[Algorithm::Etd], 1).unwrap_err();
    assert!(err.to_string().contains("singular"), "{err}");
    // ELSTD still estimates C and b
    let out = experiment::execute(&cfg, &[Algorithm::Elstd], 1).unwrap();
    assert!(out.records[0][0].final_c.is_some());
}

#[test]
fn l1_curve_needs_enough_seeds() {
    let out = experiment::execute(&config(json!({})), &[Algorithm::Elstd], 1).unwrap();
    let s = out.summary_for(Algorithm::Elstd).unwrap();
    let l1 = s.l1.as_ref().unwrap();
    assert_eq!(l1.metric, "err_C_inf");
    assert_eq!(l1.points.len(), 4);
    assert!(!l1.last_exceeds_first);
    let closure = s.closure.as_ref().unwrap();
    assert_eq!(closure.b_mean.len(), 3);
    let few = experiment::execute(&config(json!({"seeds": [1, 2, 3]})), &[Algorithm::Elstd], 1).unwrap();
    assert!(few.summary_for(Algorithm::Elstd).unwrap().l1.is_none());
}

#[test]
fn csv_floats_round_trip() {
    let out = experiment::execute(&config(json!({"seeds": [3]})), &[Algorithm::Elstd], 1).unwrap();
    let csv = records_csv(&out.records, false);
    let rec = &out.records[0][0];
    for (line, row) in csv.lines().skip(1).zip(&rec.rows) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().ok(), row.err_theta_inf);
        assert_eq!(cols[3].parse::<f64>().ok(), row.err_c_inf);
    }
}

#[test]
fn summary_statistics_match_hand_values() {
    let s = stats::summarize(&[4.0, 1.0, 3.0, 2.0, f64::NAN]).unwrap();
    assert_eq!(s.mean, 2.5);
    assert_eq!(s.median, 2.5);
    assert_eq!(s.q25, 1.75);
    assert_eq!(s.q75, 3.25);
    assert!(s.boot_lo <= s.mean && s.mean <= s.boot_hi);
}
