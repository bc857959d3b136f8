//! Exact limiting quantities of the emphatic algorithms, computed from the model.
//!
//! For a validated [`ProblemSpec`] this module produces the induced chains
//! `P_π`, `P_π°`, the multistep Bellman operator `(P^λ, r^λ)`, the behavior
//! stationary distribution, the emphasis weights `diag(M̄)`, the limit pair
//! `(C, b)` with solution `θ* = -C⁻¹b`, and the facts about `C` that the
//! convergence theory relies on (negative semidefiniteness, and nonsingularity
//! exactly when the features of positive-emphasis states span the feature space).

use alloc::vec::Vec;

use crate::error::OracleError;
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::{ProblemSpec, RANK_REL_TOL};

/// States with `m̄(s)` at or below this are treated as zero-emphasis.
pub const ZERO_EMPHASIS_TOL: f64 = 1e-12;
/// `C` counts as nonsingular when `σ_min(C) > NONSINGULAR_REL_TOL · σ_max(C)`.
pub const NONSINGULAR_REL_TOL: f64 = 1e-10;
pub const STATIONARY_MAX_ITER: usize = 1_000_000;
pub const STATIONARY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    pub p_pi: Matrix,
    pub r_pi: Vector,
    pub p_behavior: Matrix,
}

pub fn induced_chain(spec: &ProblemSpec) -> InducedChain {
    let n = spec.n_states();
    let na = spec.n_actions();
    let r_pi = Vector::from_fn(n, |s, _| {
        let mut acc = 0.0;
        for a in 0..na {
            let pa = spec.policies.target.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for s2 in 0..n {
                acc += pa * spec.mdp.p(s, a, s2) * spec.mdp.reward(s, a, s2);
            }
        }
        acc
    });
    InducedChain {
        p_pi: spec.induced_matrix(&spec.policies.target),
        r_pi,
        p_behavior: spec.induced_matrix(&spec.policies.behavior),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistepOperator {
    pub p_lambda: Matrix,
    pub r_lambda: Vector,
}

/// `P^λ = I - (I - P_πΓΛ)⁻¹(I - P_πΓ)` and `r^λ = (I - P_πΓΛ)⁻¹ r_π`.
pub fn multistep_operator(spec: &ProblemSpec, chain: &InducedChain) -> Result<MultistepOperator, OracleError> {
    let n = spec.n_states();
    let id = Matrix::identity(n, n);
    let p_gamma = &chain.p_pi * spec.gamma_matrix();
    let p_gamma_lambda = &p_gamma * spec.lambda_matrix();
    let lu = (&id - &p_gamma_lambda).lu();
    let p_lambda = &id - lu.solve(&(&id - &p_gamma)).ok_or(OracleError::Singular("I - P_pi Gamma Lambda"))?;
    let r_lambda = lu.solve(&chain.r_pi).ok_or(OracleError::Singular("I - P_pi Gamma Lambda"))?;
    Ok(MultistepOperator { p_lambda, r_lambda })
}

/// Stationary distribution of an irreducible chain, by power iteration on the
/// lazy chain `(P + I)/2` (same fixed point, never periodic).
pub fn stationary_distribution(p: &Matrix) -> Result<Vector, OracleError> {
    let n = p.nrows();
    let lazy_t = ((p + Matrix::identity(n, n)) * 0.5).transpose();
    let mut d = Vector::from_element(n, 1.0 / n as f64);
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = &lazy_t * &d;
        let total = next.sum();
        next /= total;
        let change: f64 = (&next - &d).iter().map(|x| x.abs()).sum();
        d = next;
        if change < STATIONARY_TOL {
            return Ok(d);
        }
    }
    Err(OracleError::NoConvergence(STATIONARY_MAX_ITER))
}

/// `diag(M̄) = d_{π°,i}ᵀ (I - P^λ)⁻¹`.
pub fn emphasis_weights(d_interest: &Vector, p_lambda: &Matrix) -> Result<Vector, OracleError> {
    let n = p_lambda.nrows();
    let a = (Matrix::identity(n, n) - p_lambda).transpose();
    linalg::solve(&a, d_interest).ok_or(OracleError::Singular("I - P^lambda"))
}

/// The equivalent form `d_{π°,i}ᵀ (I - P_πΓ)⁻¹ (I - P_πΓΛ)`.
pub fn emphasis_weights_direct(spec: &ProblemSpec, chain: &InducedChain, d_interest: &Vector) -> Result<Vector, OracleError> {
    let n = spec.n_states();
    let id = Matrix::identity(n, n);
    let p_gamma = &chain.p_pi * spec.gamma_matrix();
    let p_gamma_lambda = &p_gamma * spec.lambda_matrix();
    let row = linalg::solve(&(&id - &p_gamma).transpose(), d_interest).ok_or(OracleError::Singular("I - P_pi Gamma"))?;
    Ok((&id - &p_gamma_lambda).transpose() * row)
}

/// `v_π = (I - P_πΓ)⁻¹ r_π`.
pub fn value_function(spec: &ProblemSpec, chain: &InducedChain) -> Result<Vector, OracleError> {
    let n = spec.n_states();
    let a = Matrix::identity(n, n) - &chain.p_pi * spec.gamma_matrix();
    linalg::solve(&a, &chain.r_pi).ok_or(OracleError::Singular("I - P_pi Gamma"))
}

/// `C = -Φᵀ W (I - P^λ) Φ` and `b = Φᵀ W r^λ` for diagonal weights `W`.
pub fn weighted_limit(phi: &Matrix, weights: &Vector, op: &MultistepOperator) -> (Matrix, Vector) {
    let n = op.p_lambda.nrows();
    let w = Matrix::from_diagonal(weights);
    let phi_t_w = phi.transpose() * w;
    let c = -(&phi_t_w * (Matrix::identity(n, n) - &op.p_lambda) * phi);
    let b = phi_t_w * &op.r_lambda;
    (c, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessReport {
    pub is_nonsingular: bool,
    /// Smallest eigenvalue of `-(C + Cᵀ)/2`.
    pub min_sym_eig: f64,
    /// Largest eigenvalue of `(C + Cᵀ)/2`; equals `-min_sym_eig`.
    pub max_sym_eig_of_c_sym: f64,
    /// States with zero emphasis weight.
    pub j0: Vec<usize>,
    /// States with zero interest.
    pub j: Vec<usize>,
    /// Features of states outside `j0` have rank `n`.
    pub condition_14_holds: bool,
    /// Features of states outside `j` have rank `n`.
    pub condition_15_holds: bool,
    /// Largest `c` with `xᵀCx <= -c‖x‖²`.
    pub c_constant: f64,
    /// `‖b‖₂ / c`; a constraint ball of larger radius contains `θ*` in its interior.
    pub radius_threshold: f64,
    pub c_singular_values: Vec<f64>,
    /// Singular values of the rows of `Φ` outside `j0`.
    pub phi_emphasized_singular_values: Vec<f64>,
    /// Nonsingularity of `C` agrees with the feature-span condition.
    pub equivalence_holds: bool,
}

pub fn definiteness_report(spec: &ProblemSpec, m_bar: &Vector, c: &Matrix, b: &Vector) -> DefinitenessReport {
    let n_features = spec.n_features();
    let phi = spec.features.matrix();
    let j0: Vec<usize> = (0..spec.n_states()).filter(|&s| m_bar[s] <= ZERO_EMPHASIS_TOL).collect();
    let j: Vec<usize> = (0..spec.n_states()).filter(|&s| spec.interest(s) == 0.0).collect();

    let rows_outside = |excluded: &[usize]| -> Matrix {
        let keep: Vec<usize> = (0..spec.n_states()).filter(|s| !excluded.contains(s)).collect();
        Matrix::from_fn(keep.len(), n_features, |r, k| phi[(keep[r], k)])
    };
    let phi1 = rows_outside(&j0);
    let phi_emphasized_singular_values = linalg::singular_values(&phi1);
    let condition_14_holds = phi1.nrows() > 0 && linalg::numerical_rank(&phi1, RANK_REL_TOL) == n_features;
    let condition_15_holds = {
        let m = rows_outside(&j);
        m.nrows() > 0 && linalg::numerical_rank(&m, RANK_REL_TOL) == n_features
    };

    let c_singular_values = linalg::singular_values(c);
    let is_nonsingular = match (c_singular_values.first(), c_singular_values.last()) {
        (Some(&smax), Some(&smin)) => smax > 0.0 && smin > NONSINGULAR_REL_TOL * smax,
        _ => false,
    };

    let sym = linalg::symmetric_eigenvalues(c);
    let max_sym_eig_of_c_sym = sym.last().copied().unwrap_or(0.0);
    let min_sym_eig = -max_sym_eig_of_c_sym;
    let c_constant = min_sym_eig;
    let radius_threshold = if c_constant > 0.0 {
        b.norm() / c_constant
    } else {
        f64::INFINITY
    };

    DefinitenessReport {
        is_nonsingular,
        min_sym_eig,
        max_sym_eig_of_c_sym,
        j0,
        j,
        condition_14_holds,
        condition_15_holds,
        c_constant,
        radius_threshold,
        c_singular_values,
        phi_emphasized_singular_values,
        equivalence_holds: is_nonsingular == condition_14_holds,
    }
}

/// `Π = Φ(ΦᵀM̄Φ)⁻¹ΦᵀM̄`, the projection onto the feature span that is
/// orthogonal in the (semi)norm weighted by `diag(M̄)`. `None` when `ΦᵀM̄Φ` is singular.
pub fn seminorm_projection(phi: &Matrix, m_bar: &Vector) -> Option<Matrix> {
    let w = Matrix::from_diagonal(m_bar);
    let phi_t_w = phi.transpose() * w;
    let gram = &phi_t_w * phi;
    let sv = linalg::singular_values(&gram);
    match (sv.first(), sv.last()) {
        (Some(&smax), Some(&smin)) if smax > 0.0 && smin > NONSINGULAR_REL_TOL * smax => {}
        _ => return None,
    }
    let solved = linalg::solve_matrix(&gram, &phi_t_w)?;
    Some(phi * solved)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricG {
    /// `G = M̄(I - P^λ) + (I - P^λ)ᵀM̄`.
    pub g: Matrix,
    /// States whose row and column of `G` vanish (the zero-emphasis states).
    pub zero_states: Vec<usize>,
}

pub fn symmetric_g(m_bar: &Vector, p_lambda: &Matrix) -> SymmetricG {
    let n = p_lambda.nrows();
    let w = Matrix::from_diagonal(m_bar);
    let q = Matrix::identity(n, n) - p_lambda;
    let half = &w * &q;
    let g = &half + half.transpose();
    let zero_states = (0..n).filter(|&s| m_bar[s] <= ZERO_EMPHASIS_TOL).collect();
    SymmetricG { g, zero_states }
}

/// Everything the oracle knows about one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSolution {
    pub p_pi: Matrix,
    pub r_pi: Vector,
    pub p_behavior: Matrix,
    pub gamma: Matrix,
    pub lambda: Matrix,
    pub p_lambda: Matrix,
    pub r_lambda: Vector,
    pub d_behavior: Vector,
    pub d_interest: Vector,
    pub m_bar: Vector,
    pub c: Matrix,
    pub b: Vector,
    pub theta_star: Option<Vector>,
    pub v_pi: Vector,
    pub projection: Option<Matrix>,
    pub report: DefinitenessReport,
}

impl AnalyticSolution {
    /// Validates `spec`, then computes every limit quantity.
    pub fn compute(spec: &ProblemSpec) -> Result<Self, OracleError> {
        spec.validate().into_result()?;
        Self::compute_unchecked(spec)
    }

    /// Same as [`compute`](Self::compute) without re-running validation.
    pub fn compute_unchecked(spec: &ProblemSpec) -> Result<Self, OracleError> {
        let chain = induced_chain(spec);
        let op = multistep_operator(spec, &chain)?;
        let d_behavior = stationary_distribution(&chain.p_behavior)?;
        let d_interest = d_behavior.component_mul(&Vector::from_column_slice(&spec.scalars.interest));
        let m_bar = emphasis_weights(&d_interest, &op.p_lambda)?;
        let phi = spec.features.matrix();
        let (c, b) = weighted_limit(&phi, &m_bar, &op);
        let report = definiteness_report(spec, &m_bar, &c, &b);
        let theta_star = if report.is_nonsingular {
            linalg::solve(&c, &(-&b))
        } else {
            None
        };
        let v_pi = value_function(spec, &chain)?;
        let projection = seminorm_projection(&phi, &m_bar);
        Ok(Self {
            p_pi: chain.p_pi,
            r_pi: chain.r_pi,
            p_behavior: chain.p_behavior,
            gamma: spec.gamma_matrix(),
            lambda: spec.lambda_matrix(),
            p_lambda: op.p_lambda,
            r_lambda: op.r_lambda,
            d_behavior,
            d_interest,
            m_bar,
            c,
            b,
            theta_star,
            v_pi,
            projection,
            report,
        })
    }

    pub fn multistep(&self) -> MultistepOperator {
        MultistepOperator {
            p_lambda: self.p_lambda.clone(),
            r_lambda: self.r_lambda.clone(),
        }
    }

    pub fn symmetric_g(&self) -> SymmetricG {
        symmetric_g(&self.m_bar, &self.p_lambda)
    }

    /// `P_πΓ`.
    pub fn p_gamma(&self) -> Matrix {
        &self.p_pi * &self.gamma
    }

    /// `P_πΓΛ`.
    pub fn p_gamma_lambda(&self) -> Matrix {
        &self.p_pi * &self.gamma * &self.lambda
    }

    /// `‖Φθ* - Π(r^λ + P^λ Φθ*)‖∞`, when both `θ*` and `Π` exist.
    pub fn fixed_point_residual(&self, phi: &Matrix) -> Option<f64> {
        let theta = self.theta_star.as_ref()?;
        let proj = self.projection.as_ref()?;
        let v = phi * theta;
        let rhs = proj * (&self.r_lambda + &self.p_lambda * &v);
        Some(linalg::inf_norm(&(v - rhs)))
    }

    /// `‖r^λ + P^λ v_π - v_π‖∞`.
    pub fn bellman_residual(&self) -> f64 {
        linalg::inf_norm(&(&self.r_lambda + &self.p_lambda * &self.v_pi - &self.v_pi))
    }
}

/// Limit of standard off-policy TD(λ) (unit emphasis): the same construction
/// with `diag(M̄)` replaced by `d_π°`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdLimit {
    pub c: Matrix,
    pub b: Vector,
    pub theta: Option<Vector>,
    /// Largest real part of an eigenvalue of `C`; positive means the mean
    /// update `θ̇ = Cθ + b` is unstable.
    pub max_real_eigenvalue: f64,
    pub max_sym_eigenvalue: f64,
}

pub fn td_limit(spec: &ProblemSpec, solution: &AnalyticSolution) -> TdLimit {
    let (c, b) = weighted_limit(&spec.features.matrix(), &solution.d_behavior, &solution.multistep());
    let theta = linalg::solve_with_pivot_check(&c, &(-&b), 1e-12);
    TdLimit {
        max_real_eigenvalue: linalg::max_real_eigenvalue(&c),
        max_sym_eigenvalue: linalg::symmetric_eigenvalues(&c).last().copied().unwrap_or(0.0),
        c,
        b,
        theta,
    }
}

/// Upper bound on `sup_t E‖(e_t, F_t)‖` from the moment argument:
/// `L(L + L' + 1)·1ᵀ(I - P_πΓΛ)⁻¹1 + L'`, with `L >= ‖(e₀,F₀)‖`, `i(s)`,
/// `‖φ(s)‖` and `L' = L·1ᵀ(I - P_πΓ)⁻¹1` bounding `sup_t E[F_t]`.
pub fn trace_moment_bound(spec: &ProblemSpec, solution: &AnalyticSolution, e0_norm: f64, f0: f64) -> f64 {
    let n = spec.n_states();
    let id = Matrix::identity(n, n);
    let l = trace_scale(spec, e0_norm.max(f0.abs()));
    let sum_pg = resolvent_total(&(&id - solution.p_gamma()));
    let sum_pgl = resolvent_total(&(&id - solution.p_gamma_lambda()));
    let l_prime = l * sum_pg;
    l * (l + l_prime + 1.0) * sum_pgl + l_prime
}

fn trace_scale(spec: &ProblemSpec, init: f64) -> f64 {
    let max_interest = spec.scalars.interest.iter().fold(0.0_f64, |m, &x| m.max(x));
    let max_phi = (0..spec.n_states())
        .map(|s| spec.phi(s).iter().fold(0.0_f64, |m, x| m.max(x.abs())))
        .fold(0.0_f64, f64::max);
    init.max(max_interest).max(max_phi)
}

/// `1ᵀ A⁻¹ 1`.
fn resolvent_total(a: &Matrix) -> f64 {
    let n = a.nrows();
    linalg::solve(a, &Vector::from_element(n, 1.0))
        .map(|x| x.sum())
        .unwrap_or(f64::INFINITY)
}

/// `1ᵀ (Σ_{k>K} Aᵏ) 1 = 1ᵀ A^{K+1} (I - A)⁻¹ 1`.
fn tail_total(a: &Matrix, k: usize) -> f64 {
    let n = a.nrows();
    let ones = Vector::from_element(n, 1.0);
    let Some(mut x) = linalg::solve(&(Matrix::identity(n, n) - a), &ones) else {
        return f64::INFINITY;
    };
    for _ in 0..=k {
        x = a * x;
    }
    x.sum()
}

/// The two pieces of the uniform-in-`t` bound on `E‖Y_t - Y_{t,K}‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBound {
    /// Bound on `E|F_t - F̃_{t,K}|`.
    pub follow_on: f64,
    /// Bound on `E‖e_t - ẽ_{t,K}‖`.
    pub eligibility: f64,
}

impl TruncationBound {
    pub fn total(&self) -> f64 {
        self.follow_on + self.eligibility
    }
}

/// Evaluates the truncated-trace error bound `L_K` in closed form for an
/// initial condition `(e₀, F₀)` (norms in the max-norm).
///
/// * `L_K⁽¹⁾ = L·1ᵀ(Σ_{k>K}(P_πΓ)ᵏ)1` with `L = max(F₀, max_s i(s))`;
/// * `L_K⁽²⁾ = L'·1ᵀ(Σ_{k>K}(P_πΓΛ)ᵏ)1 + L'·L_K⁽¹⁾·1ᵀ(I - P_πΓΛ)⁻¹1`, where
///   `L' = max(‖e₀‖, max‖φ‖, max‖φ‖·sup_k E[M_k])` and `sup_k E[M_k]` is bounded by
///   `max_s i(s) + sup_k E[F_k]`.
pub fn truncation_bound(spec: &ProblemSpec, solution: &AnalyticSolution, k: usize, e0_norm: f64, f0: f64) -> TruncationBound {
    let n = spec.n_states();
    let id = Matrix::identity(n, n);
    let pg = solution.p_gamma();
    let pgl = solution.p_gamma_lambda();
    let max_interest = spec.scalars.interest.iter().fold(0.0_f64, |m, &x| m.max(x));
    let max_phi = (0..spec.n_states())
        .map(|s| spec.phi(s).iter().fold(0.0_f64, |m, x| m.max(x.abs())))
        .fold(0.0_f64, f64::max);

    let l = f0.abs().max(max_interest);
    let follow_on = l * tail_total(&pg, k);

    let sup_f = trace_scale(spec, e0_norm.max(f0.abs())) * resolvent_total(&(&id - &pg));
    let sup_m = max_interest + sup_f;
    let l_prime = e0_norm.max(max_phi).max(max_phi * sup_m);
    let eligibility = l_prime * tail_total(&pgl, k) + l_prime * follow_on * resolvent_total(&(&id - &pgl));
    TruncationBound { follow_on, eligibility }
}

/// `(Aᵐ 1)(s)` for every `s`: the conditional expectation of a product of `m`
/// successive one-step factors whose one-step mean matrix is `A`.
pub fn product_expectation(a: &Matrix, m: usize) -> Vector {
    let mut x = Vector::from_element(a.nrows(), 1.0);
    for _ in 0..m {
        x = a * x;
    }
    x
}
