//! Numerical probes of the quantities the convergence argument controls.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::SpecError;
use crate::learners::StepsizeSchedule;
use crate::linalg::{Matrix, Vector};
use crate::mdp::ProblemSpec;
use crate::rng::mix_seed;
use crate::scenarios;
use crate::traces::{EmphasisMode, TraceState};
use crate::trajectory::{Initial, Simulator, Transition};

/// Induced max-norm of a matrix (largest absolute row sum).
pub fn operator_inf_norm(m: &Matrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Running product `(I + α_t H_t) ··· (I + α_{t̄} H_{t̄})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTracker {
    pub product: Matrix,
    pub diverged: bool,
}

impl ProductTracker {
    pub fn new(n: usize) -> Self {
        Self {
            product: Matrix::identity(n, n),
            diverged: false,
        }
    }

    pub fn push(&mut self, alpha: f64, h: &Matrix) {
        if self.diverged {
            return;
        }
        let step = &self.product + (h * &self.product) * alpha;
        if step.iter().all(|x| x.is_finite()) {
            self.product = step;
        } else {
            self.diverged = true;
        }
    }

    pub fn norm(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            operator_inf_norm(&self.product)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductNorm {
    pub t: u64,
    /// Induced max-norm; infinite once the product overflowed.
    pub norm: f64,
}

/// Norms of `Π_{k=t̄}^{t} (I + α_k H_k)` at the requested checkpoints, where
/// `H_k = e_k ρ_k (γ_{k+1} φ(S_{k+1}) - φ(S_k))ᵀ` along one behavior trajectory.
pub fn matrix_product_decay(
    spec: &ProblemSpec,
    seed: u64,
    t_bar: u64,
    horizon: u64,
    schedule: &StepsizeSchedule,
    checkpoints: &[u64],
) -> Result<Vec<ProductNorm>, SpecError> {
    let sim = Simulator::new(spec)?;
    let mut cursor = sim.start(seed, &Initial::State(0))?;
    let n = spec.n_features();
    let mut trace = TraceState::zeros(n);
    let mut tracker = ProductTracker::new(n);
    let mut prev_rho = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().peekable();
    let mut h = Matrix::zeros(n, n);
    for t in 0..horizon {
        let tr = cursor.step();
        trace.update_at(spec, prev_rho, tr.s, EmphasisMode::Emphatic);
        if t >= t_bar {
            fill_h(spec, &trace, &tr, &mut h);
            tracker.push(schedule.alpha(t), &h);
        }
        prev_rho = tr.rho;
        while let Some(&&cp) = next_cp.peek() {
            if cp == t + 1 {
                out.push(ProductNorm { t: cp, norm: tracker.norm() });
                next_cp.next();
            } else {
                break;
            }
        }
    }
    Ok(out)
}

fn fill_h(spec: &ProblemSpec, trace: &TraceState, tr: &Transition, h: &mut Matrix) {
    let phi = spec.phi(tr.s);
    let phi_next = spec.phi(tr.s_next);
    let g = spec.gamma(tr.s_next);
    for i in 0..h.nrows() {
        let er = trace.e[i] * tr.rho;
        for j in 0..h.ncols() {
            h[(i, j)] = er * (g * phi_next[j] - phi[j]);
        }
    }
}

/// Empirical second moment of the follow-on trace on the one-state problem
/// with ratio values `1/q` and `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProbe {
    pub q: f64,
    pub gamma: f64,
    pub f0: f64,
    /// Index `t` runs over `0..=horizon`.
    pub mean_f2: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Fraction of runs with `F_t < 1e-3`.
    pub frac_small: Vec<f64>,
    /// `(γ²/q)^t F_0²`.
    pub theory: Vec<f64>,
}

impl VarianceProbe {
    /// Growth rate of `log E[F_t²]` over `1..=t_max`, fitted by weighted least
    /// squares through the exact value at `t = 0`. Each point is weighted by
    /// its inverse relative variance `(mean/se)²`; points with a zero estimate
    /// carry no information about the logarithm and are skipped.
    pub fn log_slope(&self, t_max: usize) -> Option<f64> {
        let base = libm::log(self.mean_f2[0]);
        let (mut num, mut den) = (0.0, 0.0);
        for t in 1..=t_max.min(self.mean_f2.len() - 1) {
            let (m, se) = (self.mean_f2[t], self.std_err[t]);
            if m <= 0.0 || !m.is_finite() {
                continue;
            }
            let w = if se > 0.0 { (m / se) * (m / se) } else { continue };
            let y = libm::log(m) - base;
            let x = t as f64;
            num += w * x * y;
            den += w * x * x;
        }
        (den > 0.0).then(|| num / den)
    }
}

/// Runs `n_runs` independent trajectories of the one-state problem with
/// behavior probability `q` on the target action and zero interest, so that
/// `F_t = γ ρ_{t-1} F_{t-1}` from the given `F_0`.
pub fn variance_blowup_probe(q: f64, gamma: f64, f0: f64, horizon: usize, n_runs: usize, seed: u64) -> Result<VarianceProbe, SpecError> {
    let spec = scenarios::one_state_ratio(q, gamma, 0.0);
    spec.validate().into_result()?;
    let sim = Simulator::new(&spec)?;
    let mut sum = vec![0.0; horizon + 1];
    let mut sum_sq = vec![0.0; horizon + 1];
    let mut small = vec![0u64; horizon + 1];
    for run in 0..n_runs {
        let mut cursor = sim.start(mix_seed(seed, run as u64), &Initial::State(0))?;
        let mut trace = TraceState::from_initial(vec![0.0], f0);
        for t in 0..=horizon {
            if t > 0 {
                let tr = cursor.step();
                trace.update_at(&spec, tr.rho, tr.s_next, EmphasisMode::Emphatic);
            }
            let f2 = trace.f * trace.f;
            sum[t] += f2;
            sum_sq[t] += f2 * f2;
            if trace.f < 1e-3 {
                small[t] += 1;
            }
        }
    }
    let n = n_runs as f64;
    let mean_f2: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = sum_sq
        .iter()
        .zip(&mean_f2)
        .map(|(s2, m)| libm::sqrt((s2 / n - m * m).max(0.0) / n))
        .collect();
    let rate = gamma * gamma / q;
    Ok(VarianceProbe {
        q,
        gamma,
        f0,
        mean_f2,
        std_err,
        frac_small: small.iter().map(|&c| c as f64 / n).collect(),
        theory: (0..=horizon).map(|t| libm::pow(rate, t as f64) * f0 * f0).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldPoint {
    pub t: u64,
    pub average: Vector,
    /// `‖average - (Cθ + b)‖∞`.
    pub distance: f64,
}

/// Running average `(1/t) Σ_{k<t} h(θ, ξ_k)` with θ held fixed, where
/// `h(θ, ξ) = e ρ(s,a) (r(s,a,s') + γ(s') φ(s')ᵀθ - φ(s)ᵀθ)` uses the mean
/// reward. `target` is the limit `Cθ + b` to measure against.
pub fn mean_field_average(
    spec: &ProblemSpec,
    theta: &[f64],
    target: &Vector,
    seed: u64,
    checkpoints: &[u64],
) -> Result<Vec<MeanFieldPoint>, SpecError> {
    let sim = Simulator::new(spec)?;
    let mut cursor = sim.start(seed, &Initial::State(0))?;
    let n = spec.n_features();
    let mut trace = TraceState::zeros(n);
    let mut sum = vec![0.0; n];
    let mut prev_rho = 0.0;
    let horizon = checkpoints.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().peekable();
    for t in 0..horizon {
        let tr = cursor.step();
        trace.update_at(spec, prev_rho, tr.s, EmphasisMode::Emphatic);
        let r = spec.mdp.reward(tr.s, tr.a, tr.s_next);
        let delta = crate::learners::td_error(theta, spec.phi(tr.s), spec.phi(tr.s_next), spec.gamma(tr.s_next), r);
        let scale = tr.rho * delta;
        for (acc, &e) in sum.iter_mut().zip(&trace.e) {
            *acc += e * scale;
        }
        prev_rho = tr.rho;
        while let Some(&&cp) = next_cp.peek() {
            if cp == t + 1 {
                let average = Vector::from_iterator(n, sum.iter().map(|x| x / cp as f64));
                let distance = crate::linalg::inf_norm(&(&average - target));
                out.push(MeanFieldPoint { t: cp, average, distance });
                next_cp.next();
            } else {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRow {
    pub t: u64,
    pub f: f64,
    pub f_hat: f64,
    /// `|F_0 - F̂_0| Π_{k=1}^{t} ρ_{k-1} γ_k`.
    pub predicted: f64,
    /// `‖e_t - ê_t‖∞`.
    pub e_gap: f64,
}

impl CouplingRow {
    /// `||F_t - F̂_t| - predicted|` relative to the magnitude of the operands.
    pub fn relative_error(&self) -> f64 {
        let gap = (self.f - self.f_hat).abs();
        let scale = self.f.abs().max(self.f_hat.abs()).max(self.predicted);
        if scale == 0.0 {
            0.0
        } else {
            (gap - self.predicted).abs() / scale
        }
    }
}

/// Drives two trace states from different initial conditions with the same
/// transitions and records their gap. Row `t` describes the traces at time `t`.
pub fn coupled_traces(
    spec: &ProblemSpec,
    seed: u64,
    steps: u64,
    first: (Vec<f64>, f64),
    second: (Vec<f64>, f64),
    checkpoints: Option<&[u64]>,
) -> Result<Vec<CouplingRow>, SpecError> {
    let sim = Simulator::new(spec)?;
    let mut cursor = sim.start(seed, &Initial::State(0))?;
    let mut a = TraceState::from_initial(first.0, first.1);
    let mut b = TraceState::from_initial(second.0, second.1);
    let mut predicted = (a.f - b.f).abs();
    let gap = |a: &TraceState, b: &TraceState| a.e.iter().zip(&b.e).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let keep = |t: u64| checkpoints.map_or(true, |c| c.binary_search(&t).is_ok());
    let mut rows = Vec::new();
    if keep(0) {
        rows.push(CouplingRow { t: 0, f: a.f, f_hat: b.f, predicted, e_gap: gap(&a, &b) });
    }
    for t in 1..=steps {
        let tr = cursor.step();
        a.update_at(spec, tr.rho, tr.s_next, EmphasisMode::Emphatic);
        b.update_at(spec, tr.rho, tr.s_next, EmphasisMode::Emphatic);
        predicted *= tr.rho * spec.gamma(tr.s_next);
        if keep(t) {
            rows.push(CouplingRow { t, f: a.f, f_hat: b.f, predicted, e_gap: gap(&a, &b) });
        }
    }
    Ok(rows)
}
