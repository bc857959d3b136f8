//! ETD(λ), constrained ETD(λ), ELSTD(λ), off-policy TD(λ) and the averaged
//! recursions used to analyze them.
//!
//! All learners consume one [`Transition`] per call to `observe`. The call
//! first advances the traces to `S_t` using the stored `ρ_{t-1}` (zero before
//! the first transition), then applies the parameter update for `t`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::LearnerError;
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::ProblemSpec;
use crate::traces::{EmphasisMode, TraceState};
use crate::trajectory::Transition;

/// Relative LU pivot threshold below which an estimated `C_t` is treated as singular.
pub const ELSTD_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeSchedule {
    /// `α_t = a (t + 1)^{-c}`.
    Power { a: f64, c: f64 },
    /// `α_t = c1 / (c2 + t)`.
    Harmonic { c1: f64, c2: f64 },
    /// Constant stepsize, for debugging only.
    Constant(f64),
}

impl StepsizeSchedule {
    /// `10 / (100 + t)`.
    pub const ETD_DEFAULT: Self = Self::Harmonic { c1: 10.0, c2: 100.0 };
    /// `1 / (t + 1)`.
    pub const ELSTD_DEFAULT: Self = Self::Power { a: 1.0, c: 1.0 };

    #[inline]
    pub fn alpha(&self, t: u64) -> f64 {
        match *self {
            Self::Power { a, c } => {
                if c == 1.0 {
                    a / (t as f64 + 1.0)
                } else {
                    a * libm::pow(t as f64 + 1.0, -c)
                }
            }
            Self::Harmonic { c1, c2 } => c1 / (c2 + t as f64),
            Self::Constant(a) => a,
        }
    }

    /// Checks that every `α_t` lies in `(0, 1]` and is nonincreasing.
    pub fn validate(&self) -> Result<(), LearnerError> {
        let ok = match *self {
            Self::Power { a, c } => a > 0.0 && a <= 1.0 && c >= 0.0 && c.is_finite(),
            Self::Harmonic { c1, c2 } => c1 > 0.0 && c2 > 0.0 && c1 <= c2 && c1.is_finite() && c2.is_finite(),
            Self::Constant(a) => a > 0.0 && a <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LearnerError::Schedule(alloc::format!("{self:?} does not keep the stepsize in (0, 1]")))
        }
    }

    /// Whether `α_t = O(1/t)` and `(α_t - α_{t+1})/α_t = O(1/t)`, the range
    /// with almost-sure convergence guarantees for ETD. Other schedules are
    /// reported as experimental.
    pub fn is_order_one_over_t(&self) -> bool {
        match *self {
            Self::Power { c, .. } => c >= 1.0,
            Self::Harmonic { .. } => true,
            Self::Constant(_) => false,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Self::Power { a, c } => alloc::format!("power(a={a}, c={c})"),
            Self::Harmonic { c1, c2 } => alloc::format!("harmonic(c1={c1}, c2={c2})"),
            Self::Constant(a) => alloc::format!("constant({a})"),
        }
    }
}

/// `δ_t = R_t + γ_{t+1} φ(S_{t+1})ᵀθ - φ(S_t)ᵀθ`.
#[inline]
pub fn td_error(theta: &[f64], phi: &[f64], phi_next: &[f64], gamma_next: f64, reward: f64) -> f64 {
    let v: f64 = phi.iter().zip(theta).map(|(p, t)| p * t).sum();
    let v_next: f64 = phi_next.iter().zip(theta).map(|(p, t)| p * t).sum();
    reward + gamma_next * v_next - v
}

/// `θ ← θ + α ρ δ e`.
#[inline]
pub fn etd_step(theta: &mut [f64], e: &[f64], rho: f64, phi: &[f64], phi_next: &[f64], gamma_next: f64, reward: f64, alpha: f64) {
    let delta = td_error(theta, phi, phi_next, gamma_next, reward);
    let scale = alpha * rho * delta;
    if scale != 0.0 {
        for (th, &ei) in theta.iter_mut().zip(e) {
            *th += scale * ei;
        }
    }
}

/// Scales `θ` by `η = min(1, r / ‖θ‖₂)`. Returns `true` when the scaling was active.
#[inline]
pub fn project_to_ball(theta: &mut [f64], radius: f64) -> bool {
    let norm = libm::sqrt(theta.iter().map(|x| x * x).sum::<f64>());
    if norm > radius {
        let eta = radius / norm;
        theta.iter_mut().for_each(|x| *x *= eta);
        true
    } else {
        false
    }
}

/// ETD(λ), its constrained variant, and off-policy TD(λ) (unit emphasis).
#[derive(Debug, Clone, PartialEq)]
pub struct EtdState {
    pub trace: TraceState,
    pub theta: Vec<f64>,
    /// Present for constrained ETD: `θ` is kept in the ball of this radius.
    pub constraint_radius: Option<f64>,
    pub mode: EmphasisMode,
    prev_rho: f64,
    pending_initial: bool,
    /// Number of transitions consumed.
    pub t: u64,
    /// Last step at which the projection changed `θ`.
    pub last_projection: Option<u64>,
    pub projections: u64,
}

impl EtdState {
    /// Default initial condition, `θ_0 = 0`.
    pub fn new(n_features: usize, mode: EmphasisMode, constraint_radius: Option<f64>) -> Self {
        Self {
            trace: TraceState::zeros(n_features),
            theta: vec![0.0; n_features],
            constraint_radius,
            mode,
            prev_rho: 0.0,
            pending_initial: false,
            t: 0,
            last_projection: None,
            projections: 0,
        }
    }

    /// Uses a given `(e_0, F_0, θ_0)` for `t = 0` instead of the default traces.
    pub fn with_initial(trace: TraceState, theta: Vec<f64>, mode: EmphasisMode, constraint_radius: Option<f64>) -> Self {
        Self {
            trace,
            theta,
            pending_initial: true,
            ..Self::new(0, mode, constraint_radius)
        }
    }

    pub fn observe(&mut self, spec: &ProblemSpec, tr: &Transition, alpha: f64) -> Result<(), LearnerError> {
        if self.pending_initial {
            self.pending_initial = false;
        } else {
            self.trace.update_at(spec, self.prev_rho, tr.s, self.mode);
        }
        etd_step(
            &mut self.theta,
            &self.trace.e,
            tr.rho,
            spec.phi(tr.s),
            spec.phi(tr.s_next),
            spec.gamma(tr.s_next),
            tr.reward,
            alpha,
        );
        if let Some(r) = self.constraint_radius {
            if project_to_ball(&mut self.theta, r) {
                self.last_projection = Some(self.t);
                self.projections += 1;
            }
        }
        self.prev_rho = tr.rho;
        self.t += 1;
        if self.theta.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(LearnerError::NonFinite { step: self.t - 1 })
        }
    }
}

/// ELSTD(λ): running averages `C_t`, `b_t` whose ratio estimates `θ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElstdState {
    pub trace: TraceState,
    pub c_hat: Matrix,
    pub b_hat: Vector,
    prev_rho: f64,
    pub t: u64,
}

impl ElstdState {
    pub fn new(n_features: usize) -> Self {
        Self {
            trace: TraceState::zeros(n_features),
            c_hat: Matrix::zeros(n_features, n_features),
            b_hat: Vector::zeros(n_features),
            prev_rho: 0.0,
            t: 0,
        }
    }

    /// `C ← (1-α)C + α e ρ (γ' φ' - φ)ᵀ` and `b ← (1-α)b + α e ρ R`.
    pub fn observe(&mut self, spec: &ProblemSpec, tr: &Transition, alpha: f64) -> Result<(), LearnerError> {
        self.trace.update_at(spec, self.prev_rho, tr.s, EmphasisMode::Emphatic);
        let n = self.b_hat.len();
        let phi = spec.phi(tr.s);
        let phi_next = spec.phi(tr.s_next);
        let g = spec.gamma(tr.s_next);
        let keep = 1.0 - alpha;
        for i in 0..n {
            let er = self.trace.e[i] * tr.rho;
            for j in 0..n {
                let h = er * (g * phi_next[j] - phi[j]);
                self.c_hat[(i, j)] = keep * self.c_hat[(i, j)] + alpha * h;
            }
            self.b_hat[i] = keep * self.b_hat[i] + alpha * (er * tr.reward);
        }
        self.prev_rho = tr.rho;
        self.t += 1;
        if self.c_hat.iter().all(|x| x.is_finite()) && self.b_hat.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(LearnerError::NonFinite { step: self.t - 1 })
        }
    }

    /// `θ_t = -C_t⁻¹ b_t`, or `None` while `C_t` is numerically singular.
    pub fn theta(&self) -> Option<Vector> {
        linalg::solve_with_pivot_check(&self.c_hat, &(-&self.b_hat), ELSTD_PIVOT_TOL)
    }
}

/// `G ← (1 - α) G + α h`, entrywise.
pub fn general_g_step(g: &mut Matrix, alpha: f64, h: &Matrix) {
    let keep = 1.0 - alpha;
    for (gi, &hi) in g.iter_mut().zip(h.iter()) {
        *gi = keep * *gi + alpha * hi;
    }
}

/// Drives `G_{t+1} = (1 - α_t) G_t + α_t h(Y_t, S_t, A_t, S_{t+1})` along a
/// transition stream, keeping its own traces `Y_t = (e_t, F_t)`. The function
/// `h` must be Lipschitz in `y` for each `(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralRecursion {
    pub g: Matrix,
    pub trace: TraceState,
    prev_rho: f64,
    pub t: u64,
}

impl GeneralRecursion {
    pub fn new(rows: usize, cols: usize, n_features: usize) -> Self {
        Self {
            g: Matrix::zeros(rows, cols),
            trace: TraceState::zeros(n_features),
            prev_rho: 0.0,
            t: 0,
        }
    }

    pub fn observe<H>(&mut self, spec: &ProblemSpec, tr: &Transition, alpha: f64, h: H)
    where
        H: FnOnce(&TraceState, &Transition) -> Matrix,
    {
        self.trace.update_at(spec, self.prev_rho, tr.s, EmphasisMode::Emphatic);
        let value = h(&self.trace, tr);
        general_g_step(&mut self.g, alpha, &value);
        self.prev_rho = tr.rho;
        self.t += 1;
    }
}

/// `h₁(y, s, a, s') = e ρ(s,a) (γ(s') φ(s') - φ(s))ᵀ`, whose average is `C_t`.
pub fn h1(spec: &ProblemSpec, y: &TraceState, tr: &Transition) -> Matrix {
    let n = y.e.len();
    let phi = spec.phi(tr.s);
    let phi_next = spec.phi(tr.s_next);
    let g = spec.gamma(tr.s_next);
    Matrix::from_fn(n, n, |i, j| (y.e[i] * tr.rho) * (g * phi_next[j] - phi[j]))
}

/// `h₂(y, s, a, s') = e ρ(s,a) r(s,a,s')`; its average plus the noise iterate is `b_t`.
pub fn h2(spec: &ProblemSpec, y: &TraceState, tr: &Transition) -> Matrix {
    let r = spec.mdp.reward(tr.s, tr.a, tr.s_next);
    Matrix::from_fn(y.e.len(), 1, |i, _| (y.e[i] * tr.rho) * r)
}

/// `W ← (1 - α) W + α e ρ ω` with `ω = R - r(s, a, s')`.
pub fn noise_iterate_step(w: &mut [f64], e: &[f64], rho: f64, observed_reward: f64, mean_reward: f64, alpha: f64) {
    let omega = observed_reward - mean_reward;
    let keep = 1.0 - alpha;
    for (wi, &ei) in w.iter_mut().zip(e) {
        *wi = keep * *wi + alpha * ((ei * rho) * omega);
    }
}
