//! Follow-on, emphasis and eligibility traces, full and truncated.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::ProblemSpec;

/// How the emphasis `M_t` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmphasisMode {
    /// `M_t = λ_t i(S_t) + (1 - λ_t) F_t`.
    #[default]
    Emphatic,
    /// `M_t ≡ 1`: standard off-policy TD(λ).
    Unit,
}

/// `(F_t, M_t, e_t)` after `t` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub f: f64,
    pub m: f64,
    pub e: Vec<f64>,
    /// Number of updates applied.
    pub t: u64,
}

impl TraceState {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            f: 0.0,
            m: 0.0,
            e: vec![0.0; n_features],
            t: 0,
        }
    }

    /// A caller-given initial condition `(e_0, F_0)`. `M_0` is not needed by
    /// any later update and is set to `F_0`.
    pub fn from_initial(e0: Vec<f64>, f0: f64) -> Self {
        Self { f: f0, m: f0, e: e0, t: 0 }
    }

    /// One step of the trace recursions with `prev_rho = ρ_{t-1}`:
    ///
    /// ```text
    /// F_t = γ_t ρ_{t-1} F_{t-1} + i(S_t)
    /// M_t = λ_t i(S_t) + (1 - λ_t) F_t
    /// e_t = λ_t γ_t ρ_{t-1} e_{t-1} + M_t φ(S_t)
    /// ```
    ///
    /// Starting from [`zeros`](Self::zeros) with `prev_rho = 0` gives the
    /// default initial condition `F_0 = M_0 = i(S_0)`, `e_0 = i(S_0) φ(S_0)`.
    #[inline]
    pub fn update(&mut self, prev_rho: f64, gamma: f64, lambda: f64, interest: f64, phi: &[f64], mode: EmphasisMode) {
        let carry = gamma * prev_rho;
        self.f = carry * self.f + interest;
        self.m = match mode {
            EmphasisMode::Emphatic => lambda * interest + (1.0 - lambda) * self.f,
            EmphasisMode::Unit => 1.0,
        };
        let decay = lambda * gamma * prev_rho;
        for (e, &p) in self.e.iter_mut().zip(phi) {
            *e = decay * *e + self.m * p;
        }
        self.t += 1;
    }

    /// [`update`](Self::update) with the scalars of state `s` read from `spec`.
    #[inline]
    pub fn update_at(&mut self, spec: &ProblemSpec, prev_rho: f64, s: usize, mode: EmphasisMode) {
        self.update(prev_rho, spec.gamma(s), spec.lambda(s), spec.interest(s), spec.phi(s), mode);
    }

    /// `max(|F|, ‖e‖∞)`.
    pub fn norm(&self) -> f64 {
        self.e.iter().fold(self.f.abs(), |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.m.is_finite() && self.e.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct WindowEntry {
    s: usize,
    interest: f64,
    /// `ρ_{k-1} γ_k`, the factor that carries `F` into time `k`.
    carry: f64,
    /// `λ_k ρ_{k-1} γ_k`.
    beta: f64,
    /// `M̃_k`.
    m: f64,
}

/// Traces truncated to a window of the last `K + 1` times:
///
/// ```text
/// F̃_t = Σ_{k=t-K}^{t} i(S_k) ρ_k γ_{k+1} ··· ρ_{t-1} γ_t
/// M̃_t = λ_t i(S_t) + (1 - λ_t) F̃_t
/// ẽ_t = Σ_{k=t-K}^{t} M̃_k φ(S_k) β_{k+1} ··· β_t
/// ```
///
/// For `t <= K` these coincide with the full traces (default initial
/// condition), which the bank tracks exactly by running the ordinary recursion.
/// The window stores one entry per time with `M̃_k` cached, so no older history
/// is needed.
#[derive(Debug, Clone)]
pub struct TruncatedTraceBank {
    k: usize,
    window: VecDeque<WindowEntry>,
    full: TraceState,
    pub f: f64,
    pub m: f64,
    pub e: Vec<f64>,
    t: u64,
}

impl TruncatedTraceBank {
    pub fn new(k: usize, n_features: usize) -> Self {
        Self {
            k,
            window: VecDeque::with_capacity(k + 2),
            full: TraceState::zeros(n_features),
            f: 0.0,
            m: 0.0,
            e: vec![0.0; n_features],
            t: 0,
        }
    }

    pub fn window_len(&self) -> usize {
        self.k
    }

    /// Time index of the traces currently held (after the first update, `0`).
    pub fn time(&self) -> Option<u64> {
        self.t.checked_sub(1)
    }

    /// Advances to state `s`, with `prev_rho = ρ_{t-1}` (zero at `t = 0`).
    pub fn update(&mut self, spec: &ProblemSpec, prev_rho: f64, s: usize) {
        let t = self.t;
        let (gamma, lambda, interest) = (spec.gamma(s), spec.lambda(s), spec.interest(s));
        let carry = prev_rho * gamma;
        self.t += 1;

        if t <= self.k as u64 {
            self.full.update(prev_rho, gamma, lambda, interest, spec.phi(s), EmphasisMode::Emphatic);
            self.f = self.full.f;
            self.m = self.full.m;
            self.e.copy_from_slice(&self.full.e);
            self.push(WindowEntry { s, interest, carry, beta: lambda * carry, m: self.m });
            return;
        }

        // The entry for time t joins; the window then spans t-K..=t.
        self.push(WindowEntry { s, interest, carry, beta: lambda * carry, m: 0.0 });
        let len = self.window.len();
        let mut f = 0.0;
        let mut prod = 1.0;
        for j in (0..len).rev() {
            let entry = &self.window[j];
            f += entry.interest * prod;
            prod *= entry.carry;
        }
        let m = lambda * interest + (1.0 - lambda) * f;
        self.window[len - 1].m = m;

        self.e.iter_mut().for_each(|x| *x = 0.0);
        let mut prod = 1.0;
        for j in (0..len).rev() {
            let entry = &self.window[j];
            let w = entry.m * prod;
            for (x, &p) in self.e.iter_mut().zip(spec.phi(entry.s)) {
                *x += w * p;
            }
            prod *= entry.beta;
        }
        self.f = f;
        self.m = m;
    }

    fn push(&mut self, entry: WindowEntry) {
        if self.window.len() == self.k + 1 {
            self.window.pop_front();
        }
        self.window.push_back(entry);
    }
}
