//! `analyze` and `verify`: the oracle's view of a single spec.

use etdlab_core::linalg::{self, Matrix, Vector};
use etdlab_core::mdp::ProblemSpec;
use etdlab_core::oracle::{self, AnalyticSolution, ZERO_EMPHASIS_TOL};
use serde_json::{json, Value};

/// Tolerances of the analytic checks run by [`verify_spec`].
pub const BELLMAN_TOL: f64 = 1e-9;
pub const SEMIDEFINITE_TOL: f64 = 1e-10;
pub const PROJECTION_TOL: f64 = 1e-8;
pub const STATIONARY_TOL: f64 = 1e-10;

fn matrix_json(m: &Matrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!(m.row(i).iter().copied().collect::<Vec<f64>>())).collect())
}

fn vector_json(v: &Vector) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

/// Validation checks plus, when validation passes, every oracle quantity.
pub fn analyze(spec: &ProblemSpec) -> Value {
    let report = spec.validate();
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "value": c.value, "detail": c.detail}))
        .collect();
    let mut doc = json!({
        "n_states": spec.n_states(),
        "n_actions": spec.n_actions(),
        "n_features": spec.n_features(),
        "validation": {"passed": report.passed(), "checks": checks},
    });
    if !report.passed() {
        return doc;
    }
    match AnalyticSolution::compute_unchecked(spec) {
        Ok(sol) => {
            let td = oracle::td_limit(spec, &sol);
            let r = &sol.report;
            doc["solution"] = json!({
                "P_pi": matrix_json(&sol.p_pi),
                "r_pi": vector_json(&sol.r_pi),
                "P_lambda": matrix_json(&sol.p_lambda),
                "r_lambda": vector_json(&sol.r_lambda),
                "d_behavior": vector_json(&sol.d_behavior),
                "m_bar": vector_json(&sol.m_bar),
                "C": matrix_json(&sol.c),
                "b": vector_json(&sol.b),
                "theta_star": sol.theta_star.as_ref().map(vector_json),
                "v_pi": vector_json(&sol.v_pi),
                "projected_values": sol.theta_star.as_ref().map(|t| vector_json(&(spec.features.matrix() * t))),
            });
            doc["definiteness"] = json!({
                "is_nonsingular": r.is_nonsingular,
                "min_eig_neg_sym_C": r.min_sym_eig,
                "zero_emphasis_states": r.j0,
                "zero_interest_states": r.j,
                "emphasized_features_span": r.condition_14_holds,
                "interest_features_span": r.condition_15_holds,
                "c_constant": r.c_constant,
                "radius_threshold": if r.radius_threshold.is_finite() { json!(r.radius_threshold) } else { Value::Null },
                "singular_values_C": r.c_singular_values,
                "singular_values_emphasized_features": r.phi_emphasized_singular_values,
            });
            doc["td_offpolicy"] = json!({
                "C": matrix_json(&td.c),
                "b": vector_json(&td.b),
                "theta": td.theta.as_ref().map(vector_json),
                "max_real_eigenvalue": td.max_real_eigenvalue,
                "max_eig_sym_C": td.max_sym_eigenvalue,
                "mean_update_stable": td.max_real_eigenvalue < 0.0,
            });
        }
        Err(e) => doc["oracle_error"] = json!(e.to_string()),
    }
    doc
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<VerifyLine>,
    pub theta_star_present: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&format!("{} {}: {}\n", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail));
        }
        out.push_str(if self.theta_star_present {
            "theta_star: present\n"
        } else {
            "theta_star: absent\n"
        });
        out
    }
}

/// Runs the validation checks and the analytic invariant suite.
pub fn verify_spec(spec: &ProblemSpec) -> VerifyReport {
    let mut lines = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| lines.push(VerifyLine { name: name.into(), passed, detail });
    let report = spec.validate();
    for c in &report.checks {
        let detail = if c.detail.is_empty() {
            format!("value {}", c.value)
        } else {
            format!("{} (value {})", c.detail, c.value)
        };
        push(c.name, c.passed, detail);
    }
    if !report.passed() {
        return VerifyReport { lines, theta_star_present: false };
    }
    let sol = match AnalyticSolution::compute_unchecked(spec) {
        Ok(s) => s,
        Err(e) => {
            push("oracle", false, e.to_string());
            return VerifyReport { lines, theta_star_present: false };
        }
    };

    let stat = linalg::inf_norm(&(sol.p_behavior.transpose() * &sol.d_behavior - &sol.d_behavior));
    push("oracle.stationary", stat < STATIONARY_TOL, format!("‖dᵀP - dᵀ‖∞ = {stat:e}"));

    let bellman = sol.bellman_residual();
    push("oracle.bellman", bellman < BELLMAN_TOL, format!("‖r^λ + P^λ v - v‖∞ = {bellman:e}"));

    let dominance = (0..spec.n_states()).map(|s| sol.d_interest[s] - sol.m_bar[s]).fold(f64::NEG_INFINITY, f64::max);
    push("oracle.emphasis_dominates_interest", dominance <= 1e-12, format!("max(d_i - m̄) = {dominance:e}"));

    let max_sym = sol.report.max_sym_eig_of_c_sym;
    let scale = linalg::max_abs(&sol.c).max(1.0);
    push(
        "oracle.negative_semidefinite",
        max_sym <= SEMIDEFINITE_TOL * scale,
        format!("max eig (C + Cᵀ)/2 = {max_sym:e}"),
    );

    let g = sol.symmetric_g();
    let g_min = linalg::symmetric_eigenvalues(&g.g).first().copied().unwrap_or(0.0);
    let g_scale = linalg::max_abs(&g.g).max(1.0);
    let zero_rows = g
        .zero_states
        .iter()
        .map(|&s| (0..spec.n_states()).map(|j| g.g[(s, j)].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    push(
        "oracle.g_positive_semidefinite",
        g_min >= -SEMIDEFINITE_TOL * g_scale && zero_rows <= ZERO_EMPHASIS_TOL,
        format!("min eig G = {g_min:e}, largest entry on zero-emphasis rows = {zero_rows:e}"),
    );

    let r = &sol.report;
    push(
        "oracle.feature_span_equivalence",
        r.equivalence_holds,
        format!("C nonsingular = {}, emphasized features span = {}", r.is_nonsingular, r.condition_14_holds),
    );
    if spec.scalars.interest.iter().all(|&i| i > 0.0) {
        push("oracle.negative_definite", r.min_sym_eig > 0.0, format!("min eig -(C + Cᵀ)/2 = {:e}", r.min_sym_eig));
    }

    let phi = spec.features.matrix();
    match &sol.projection {
        Some(p) => {
            let idem = linalg::max_abs(&(p * p - p));
            push("oracle.projection_idempotent", idem < PROJECTION_TOL, format!("‖Π² - Π‖ = {idem:e}"));
            if let Some(res) = sol.fixed_point_residual(&phi) {
                push("oracle.projected_fixed_point", res < PROJECTION_TOL, format!("‖Φθ* - Π T(Φθ*)‖∞ = {res:e}"));
            }
        }
        None => push("oracle.projection_idempotent", true, "Π undefined (ΦᵀM̄Φ singular); skipped".into()),
    }
    VerifyReport {
        lines,
        theta_star_present: sol.theta_star.is_some(),
    }
}
