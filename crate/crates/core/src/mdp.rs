//! Finite MDP, target/behavior policy pair, features and the per-state
//! functions γ (continuation), λ (bootstrapping) and i (interest).
//!
//! [`ProblemSpec::new`] only checks shapes. Everything else (stochasticity,
//! coverage, irreducibility, termination, feature rank) is measured by
//! [`ProblemSpec::validate`], which never fails: it returns a report.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::SpecError;
use crate::linalg::{self, Matrix, Vector};

/// Row sums must match 1 to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 10_000;
pub const SPECTRAL_TOL: f64 = 1e-12;
/// `ρ(P_π Γ)` at or above `1 - SPECTRAL_MARGIN` fails validation.
pub const SPECTRAL_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    /// `p(s'|s,a)` stored at `[(s * A + a) * N + s']`.
    transition: Vec<f64>,
    reward_mean: Vec<f64>,
    reward_noise_std: Vec<f64>,
}

impl Mdp {
    /// Flat arrays are indexed `[s][a][s']`. A `None` noise table means noiseless rewards.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward_mean: Vec<f64>,
        reward_noise_std: Option<Vec<f64>>,
    ) -> Result<Self, SpecError> {
        if n_states == 0 {
            return Err(SpecError::Empty { field: "mdp.n_states".into() });
        }
        if n_actions == 0 {
            return Err(SpecError::Empty { field: "mdp.n_actions".into() });
        }
        let len = n_states * n_actions * n_states;
        check_len("mdp.transition", len, transition.len())?;
        check_len("mdp.reward_mean", len, reward_mean.len())?;
        let reward_noise_std = reward_noise_std.unwrap_or_else(|| vec![0.0; len]);
        check_len("mdp.reward_noise_std", len, reward_noise_std.len())?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward_mean,
            reward_noise_std,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn idx(&self, s: usize, a: usize, s_next: usize) -> usize {
        (s * self.n_actions + a) * self.n_states + s_next
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[self.idx(s, a, s_next)]
    }

    /// The distribution `p(·|s,a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.idx(s, a, 0);
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.reward_mean[self.idx(s, a, s_next)]
    }

    #[inline]
    pub fn noise_std(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.reward_noise_std[self.idx(s, a, s_next)]
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward_mean
    }

    pub fn noise_table(&self) -> &[f64] {
        &self.reward_noise_std
    }

    pub fn has_reward_noise(&self) -> bool {
        self.reward_noise_std.iter().any(|&s| s != 0.0)
    }
}

/// A stationary randomized policy, `[s][a]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>, field: &str) -> Result<Self, SpecError> {
        check_len(field, n_states * n_actions, probs.len())?;
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPair {
    pub target: Policy,
    pub behavior: Policy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFunctions {
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub interest: Vec<f64>,
}

/// Feature vectors `φ(s)`, i.e. the rows of `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    n_features: usize,
    phi: Vec<f64>,
}

impl FeatureMap {
    pub fn new(n_states: usize, n_features: usize, phi: Vec<f64>) -> Result<Self, SpecError> {
        if n_features == 0 {
            return Err(SpecError::Empty { field: "features.n_features".into() });
        }
        check_len("features.phi", n_states * n_features, phi.len())?;
        Ok(Self { n_features, phi })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn phi(&self, s: usize) -> &[f64] {
        &self.phi[s * self.n_features..(s + 1) * self.n_features]
    }

    pub fn table(&self) -> &[f64] {
        &self.phi
    }

    /// The `N × n` matrix `Φ`.
    pub fn matrix(&self) -> Matrix {
        let n_states = self.phi.len() / self.n_features;
        Matrix::from_row_slice(n_states, self.n_features, &self.phi)
    }
}

/// A complete scenario: MDP, policies, per-state functions and features.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub mdp: Mdp,
    pub policies: PolicyPair,
    pub scalars: ScalarFunctions,
    pub features: FeatureMap,
}

impl ProblemSpec {
    pub fn new(
        mdp: Mdp,
        policies: PolicyPair,
        scalars: ScalarFunctions,
        features: FeatureMap,
    ) -> Result<Self, SpecError> {
        let (n, a) = (mdp.n_states, mdp.n_actions);
        for (field, pol) in [("policies.target", &policies.target), ("policies.behavior", &policies.behavior)] {
            check_len(field, n * a, pol.probs.len())?;
            if pol.n_actions != a {
                return Err(SpecError::Dimension {
                    field: format!("{field}.n_actions"),
                    expected: a,
                    found: pol.n_actions,
                });
            }
        }
        check_len("scalars.gamma", n, scalars.gamma.len())?;
        check_len("scalars.lambda", n, scalars.lambda.len())?;
        check_len("scalars.interest", n, scalars.interest.len())?;
        check_len("features.phi", n * features.n_features, features.phi.len())?;
        Ok(Self {
            mdp,
            policies,
            scalars,
            features,
        })
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.mdp.n_actions
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features
    }

    #[inline]
    pub fn gamma(&self, s: usize) -> f64 {
        self.scalars.gamma[s]
    }

    #[inline]
    pub fn lambda(&self, s: usize) -> f64 {
        self.scalars.lambda[s]
    }

    #[inline]
    pub fn interest(&self, s: usize) -> f64 {
        self.scalars.interest[s]
    }

    #[inline]
    pub fn phi(&self, s: usize) -> &[f64] {
        self.features.phi(s)
    }

    pub fn phi_vector(&self, s: usize) -> Vector {
        Vector::from_column_slice(self.phi(s))
    }

    /// `ρ(s,a) = π(a|s) / π°(a|s)`, with `0/0 = 0`.
    pub fn importance_ratio(&self, s: usize, a: usize) -> Result<f64, SpecError> {
        if s >= self.n_states() {
            return Err(SpecError::StateOutOfRange { state: s, n_states: self.n_states() });
        }
        if a >= self.n_actions() {
            return Err(SpecError::ActionOutOfRange { action: a, n_actions: self.n_actions() });
        }
        let target = self.policies.target.prob(s, a);
        let behavior = self.policies.behavior.prob(s, a);
        if behavior > 0.0 {
            Ok(target / behavior)
        } else if target == 0.0 {
            Ok(0.0)
        } else {
            Err(SpecError::Coverage { state: s, action: a })
        }
    }

    /// All ratios, `[s][a]` row-major.
    pub fn ratio_table(&self) -> Result<Vec<f64>, SpecError> {
        let mut out = Vec::with_capacity(self.n_states() * self.n_actions());
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                out.push(self.importance_ratio(s, a)?);
            }
        }
        Ok(out)
    }

    /// State-to-state matrix induced by a policy: `Σ_a π(a|s) p(s'|s,a)`.
    pub fn induced_matrix(&self, policy: &Policy) -> Matrix {
        let n = self.n_states();
        Matrix::from_fn(n, n, |s, s2| {
            (0..self.n_actions()).map(|a| policy.prob(s, a) * self.mdp.p(s, a, s2)).sum()
        })
    }

    pub fn gamma_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(&self.scalars.gamma))
    }

    pub fn lambda_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(&self.scalars.lambda))
    }

    /// Runs every invariant check and reports measured values.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let n = self.n_states();
        let na = self.n_actions();

        // transition rows
        let mut worst_sum = 0.0_f64;
        let mut min_entry = f64::INFINITY;
        let mut finite = true;
        for s in 0..n {
            for a in 0..na {
                let row = self.mdp.transition_row(s, a);
                finite &= row.iter().all(|x| x.is_finite());
                worst_sum = worst_sum.max((row.iter().sum::<f64>() - 1.0).abs());
                min_entry = row.iter().fold(min_entry, |m, &x| m.min(x));
            }
        }
        checks.push(Check::new(
            "transition.stochastic",
            finite && worst_sum <= STOCHASTIC_TOL && min_entry >= 0.0,
            worst_sum,
            format!("max |row sum - 1| = {worst_sum:e}, min entry = {min_entry}"),
        ));

        let rewards_ok = self.mdp.reward_mean.iter().all(|x| x.is_finite());
        checks.push(Check::new(
            "reward_mean.finite",
            rewards_ok,
            if rewards_ok { 0.0 } else { 1.0 },
            String::new(),
        ));
        let max_std = self.mdp.reward_noise_std.iter().fold(0.0_f64, |m, &x| m.max(x));
        let noise_ok = self.mdp.reward_noise_std.iter().all(|x| x.is_finite() && *x >= 0.0);
        checks.push(Check::new(
            "reward_noise_std.bounded",
            noise_ok,
            max_std,
            format!("max std = {max_std}"),
        ));

        for (name, pol) in [
            ("policies.target.stochastic", &self.policies.target),
            ("policies.behavior.stochastic", &self.policies.behavior),
        ] {
            let mut worst = 0.0_f64;
            let mut min_entry = f64::INFINITY;
            let mut finite = true;
            for s in 0..n {
                let row = pol.row(s);
                finite &= row.iter().all(|x| x.is_finite());
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
                min_entry = row.iter().fold(min_entry, |m, &x| m.min(x));
            }
            checks.push(Check::new(
                name,
                finite && worst <= STOCHASTIC_TOL && min_entry >= 0.0,
                worst,
                format!("max |row sum - 1| = {worst:e}, min entry = {min_entry}"),
            ));
        }

        let mut uncovered = Vec::new();
        for s in 0..n {
            for a in 0..na {
                if self.policies.target.prob(s, a) > 0.0 && self.policies.behavior.prob(s, a) <= 0.0 {
                    uncovered.push((s, a));
                }
            }
        }
        checks.push(Check::new(
            "policies.coverage",
            uncovered.is_empty(),
            uncovered.len() as f64,
            if uncovered.is_empty() {
                String::new()
            } else {
                format!("uncovered (state, action) pairs: {uncovered:?}")
            },
        ));

        let reach = reachability_closure(&self.induced_matrix(&self.policies.behavior));
        let unreachable = reach.iter().filter(|r| !**r).count();
        checks.push(Check::new(
            "policies.behavior.irreducible",
            unreachable == 0,
            unreachable as f64,
            format!("{unreachable} unreachable ordered state pairs"),
        ));

        let in_range = |v: &[f64], lo: f64, hi: f64| v.iter().all(|x| x.is_finite() && *x >= lo && *x <= hi);
        let scalars_ok = in_range(&self.scalars.gamma, 0.0, 1.0)
            && in_range(&self.scalars.lambda, 0.0, 1.0)
            && in_range(&self.scalars.interest, 0.0, f64::MAX);
        checks.push(Check::new(
            "scalars.range",
            scalars_ok,
            if scalars_ok { 0.0 } else { 1.0 },
            "gamma, lambda in [0,1]; interest >= 0".into(),
        ));

        let p_gamma = self.induced_matrix(&self.policies.target) * self.gamma_matrix();
        let radius = linalg::nonnegative_spectral_radius(&p_gamma, SPECTRAL_MAX_ITER, SPECTRAL_TOL);
        let radius_value = if p_gamma.iter().all(|x| x.is_finite()) {
            radius.upper
        } else {
            f64::NAN
        };
        checks.push(Check::new(
            "termination.spectral_radius",
            radius_value < 1.0 - SPECTRAL_MARGIN,
            radius_value,
            format!(
                "rho(P_pi Gamma) = {radius_value} (lower bound {}, {} iterations)",
                radius.lower, radius.iterations
            ),
        ));

        let phi = self.features.matrix();
        let rank = if phi.iter().all(|x| x.is_finite()) {
            linalg::numerical_rank(&phi, RANK_REL_TOL)
        } else {
            0
        };
        checks.push(Check::new(
            "features.full_rank",
            rank == self.n_features(),
            rank as f64,
            format!("rank {rank} of {} columns", self.n_features()),
        ));

        ValidationReport { checks }
    }
}

fn check_len(field: &str, expected: usize, found: usize) -> Result<(), SpecError> {
    if expected == found {
        Ok(())
    } else {
        Err(SpecError::Dimension {
            field: field.to_string(),
            expected,
            found,
        })
    }
}

/// Transitive closure of the support of `p` (Warshall). Entry `[i*n + j]` is
/// true when `j` is reachable from `i` in one or more steps.
pub fn reachability_closure(p: &Matrix) -> Vec<bool> {
    let n = p.nrows();
    let mut reach: Vec<bool> = (0..n * n).map(|k| p[(k / n, k % n)] > 0.0).collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    if reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
    }
    reach
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// The measured quantity the decision was based on.
    pub value: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, value: f64, detail: String) -> Self {
        Self {
            name,
            passed,
            value,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `Ok(())` when every check passes, otherwise a [`SpecError::Invalid`]
    /// listing the failed checks.
    pub fn into_result(self) -> Result<(), SpecError> {
        if self.passed() {
            return Ok(());
        }
        let names: Vec<String> = self
            .failures()
            .map(|c| {
                if c.detail.is_empty() {
                    c.name.to_string()
                } else {
                    format!("{} ({})", c.name, c.detail)
                }
            })
            .collect();
        Err(SpecError::Invalid(names.join("; ")))
    }
}
