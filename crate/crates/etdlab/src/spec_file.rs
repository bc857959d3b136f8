//! JSON problem-spec files.
//!
//! ```json
//! {
//!   "n_states": 2, "n_actions": 1,
//!   "transition": [[[0.5, 0.5]], [[1.0, 0.0]]],
//!   "reward_mean": [[[1.0, 0.0]], [[0.0, 0.0]]],
//!   "reward_noise_std": [[[0.0, 0.0]], [[0.0, 0.0]]],
//!   "target_policy": [[1.0], [1.0]],
//!   "behavior_policy": [[1.0], [1.0]],
//!   "gamma": [0.9, 0.9], "lambda": [0.0, 0.0], "interest": [1.0, 1.0],
//!   "features": [[1.0], [0.5]]
//! }
//! ```
//!
//! `reward_noise_std` is optional and defaults to zero. Errors name the
//! offending field by path, e.g. `transition[1][0]`.

use std::fs;
use std::path::{Path, PathBuf};

use etdlab_core::mdp::{FeatureMap, Mdp, Policy, PolicyPair, ProblemSpec, ScalarFunctions};
use etdlab_core::SpecError;
use serde_json::{json, Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum SpecFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("spec failed validation: {0}")]
    Validation(String),
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> SpecFileError {
    SpecFileError::Field {
        field: field.into(),
        message: message.into(),
    }
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec, SpecFileError> {
    let text = fs::read_to_string(path).map_err(|source| SpecFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

/// Loads and, when `strict`, also requires every validation check to pass.
pub fn load_spec_checked(path: &Path, strict: bool) -> Result<ProblemSpec, SpecFileError> {
    let spec = load_spec(path)?;
    if strict {
        let report = spec.validate();
        if !report.passed() {
            let failures: Vec<String> = report.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
            return Err(SpecFileError::Validation(failures.join("; ")));
        }
    }
    Ok(spec)
}

pub fn parse_spec(text: &str) -> Result<ProblemSpec, SpecFileError> {
    let root: Value = serde_json::from_str(text)?;
    spec_from_value(&root)
}

pub fn spec_from_value(root: &Value) -> Result<ProblemSpec, SpecFileError> {
    let obj = root.as_object().ok_or_else(|| field_err("<root>", "expected an object"))?;
    let n = positive(obj, "n_states")?;
    let na = positive(obj, "n_actions")?;

    let transition = tensor3(obj, "transition", "transition", n, na)?;
    let reward = tensor3(obj, "reward_mean", "reward_mean", n, na)?;
    let noise = match obj.get("reward_noise_std") {
        None | Some(Value::Null) => None,
        Some(_) => Some(tensor3(obj, "reward_noise_std", "reward_noise_std", n, na)?),
    };
    let target = matrix(obj, "target_policy", "policies.target", n, Some(na))?.0;
    let behavior = matrix(obj, "behavior_policy", "policies.behavior", n, Some(na))?.0;
    let gamma = vector(obj, "gamma", n)?;
    let lambda = vector(obj, "lambda", n)?;
    let interest = vector(obj, "interest", n)?;
    let (phi, n_features) = matrix(obj, "features", "features", n, None)?;

    let mdp = Mdp::new(n, na, transition, reward, noise)?;
    let policies = PolicyPair {
        target: Policy::new(n, na, target, "policies.target")?,
        behavior: Policy::new(n, na, behavior, "policies.behavior")?,
    };
    let features = FeatureMap::new(n, n_features, phi)?;
    Ok(ProblemSpec::new(mdp, policies, ScalarFunctions { gamma, lambda, interest }, features)?)
}

fn positive(obj: &Map<String, Value>, key: &str) -> Result<usize, SpecFileError> {
    let v = obj.get(key).ok_or_else(|| field_err(key, "missing"))?;
    match v.as_u64() {
        Some(x) if x > 0 => Ok(x as usize),
        _ => Err(field_err(key, "expected a positive integer")),
    }
}

fn number(v: &Value, path: &str) -> Result<f64, SpecFileError> {
    v.as_f64().ok_or_else(|| field_err(path, "expected a number"))
}

fn array<'a>(v: &'a Value, path: &str, len: Option<usize>) -> Result<&'a Vec<Value>, SpecFileError> {
    let arr = v.as_array().ok_or_else(|| field_err(path, "expected an array"))?;
    if let Some(len) = len {
        if arr.len() != len {
            return Err(field_err(path, format!("expected length {len}, found {}", arr.len())));
        }
    }
    Ok(arr)
}

fn tensor3(obj: &Map<String, Value>, key: &str, path: &str, n: usize, na: usize) -> Result<Vec<f64>, SpecFileError> {
    let v = obj.get(key).ok_or_else(|| field_err(path, "missing"))?;
    let mut out = Vec::with_capacity(n * na * n);
    for (s, by_action) in array(v, path, Some(n))?.iter().enumerate() {
        for (a, row) in array(by_action, &format!("{path}[{s}]"), Some(na))?.iter().enumerate() {
            let row_path = format!("{path}[{s}][{a}]");
            for (s2, x) in array(row, &row_path, Some(n))?.iter().enumerate() {
                out.push(number(x, &format!("{row_path}[{s2}]"))?);
            }
        }
    }
    Ok(out)
}

/// Rows of equal length; returns the flat table and the row length.
fn matrix(obj: &Map<String, Value>, key: &str, path: &str, n: usize, cols: Option<usize>) -> Result<(Vec<f64>, usize), SpecFileError> {
    let v = obj.get(key).ok_or_else(|| field_err(path, "missing"))?;
    let rows = array(v, path, Some(n))?;
    let width = match cols {
        Some(c) => c,
        None => array(&rows[0], &format!("{path}[0]"), None)?.len(),
    };
    if width == 0 {
        return Err(field_err(format!("{path}[0]"), "rows must be nonempty"));
    }
    let mut out = Vec::with_capacity(n * width);
    for (s, row) in rows.iter().enumerate() {
        let row_path = format!("{path}[{s}]");
        for (k, x) in array(row, &row_path, Some(width))?.iter().enumerate() {
            out.push(number(x, &format!("{row_path}[{k}]"))?);
        }
    }
    Ok((out, width))
}

fn vector(obj: &Map<String, Value>, key: &str, n: usize) -> Result<Vec<f64>, SpecFileError> {
    let v = obj.get(key).ok_or_else(|| field_err(key, "missing"))?;
    array(v, key, Some(n))?
        .iter()
        .enumerate()
        .map(|(s, x)| number(x, &format!("{key}[{s}]")))
        .collect()
}

/// Serializes a spec. Floats are written in shortest round-trip form, so
/// loading the result gives back bit-identical values.
pub fn spec_to_value(spec: &ProblemSpec) -> Value {
    let n = spec.n_states();
    let na = spec.n_actions();
    let t3 = |table: &[f64]| -> Value {
        Value::Array(
            (0..n)
                .map(|s| Value::Array((0..na).map(|a| json!(table[(s * na + a) * n..(s * na + a + 1) * n])).collect()))
                .collect(),
        )
    };
    let rows = |table: &[f64], width: usize| -> Value { Value::Array(table.chunks(width).map(|r| json!(r)).collect()) };
    let mut obj = Map::new();
    obj.insert("n_states".into(), json!(n));
    obj.insert("n_actions".into(), json!(na));
    obj.insert("transition".into(), t3(spec.mdp.transition_table()));
    obj.insert("reward_mean".into(), t3(spec.mdp.reward_table()));
    obj.insert("reward_noise_std".into(), t3(spec.mdp.noise_table()));
    obj.insert("target_policy".into(), rows(spec.policies.target.table(), na));
    obj.insert("behavior_policy".into(), rows(spec.policies.behavior.table(), na));
    obj.insert("gamma".into(), json!(spec.scalars.gamma));
    obj.insert("lambda".into(), json!(spec.scalars.lambda));
    obj.insert("interest".into(), json!(spec.scalars.interest));
    obj.insert("features".into(), rows(spec.features.table(), spec.n_features()));
    Value::Object(obj)
}

/// Keys in the order they are written.
const KEY_ORDER: [&str; 11] = [
    "n_states",
    "n_actions",
    "transition",
    "reward_mean",
    "reward_noise_std",
    "target_policy",
    "behavior_policy",
    "gamma",
    "lambda",
    "interest",
    "features",
];

/// Spec text with keys in schema order and one state per line.
pub fn spec_to_string(spec: &ProblemSpec) -> String {
    let value = spec_to_value(spec);
    let mut out = String::from("{\n");
    for (i, key) in KEY_ORDER.iter().enumerate() {
        let v = &value[*key];
        out.push_str(&format!("  \"{key}\": "));
        match v.as_array() {
            Some(rows) if rows.iter().any(Value::is_array) => {
                out.push_str("[\n");
                for (j, row) in rows.iter().enumerate() {
                    out.push_str("    ");
                    out.push_str(&row.to_string());
                    out.push_str(if j + 1 < rows.len() { ",\n" } else { "\n" });
                }
                out.push_str("  ]");
            }
            _ => out.push_str(&v.to_string()),
        }
        out.push_str(if i + 1 < KEY_ORDER.len() { ",\n" } else { "\n" });
    }
    out.push_str("}\n");
    out
}

pub fn save_spec(spec: &ProblemSpec, path: &Path) -> Result<(), SpecFileError> {
    fs::write(path, spec_to_string(spec)).map_err(|source| SpecFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}
