//! Trajectories generated by the behavior policy.
//!
//! A [`Simulator`] caches the per-state tables of a spec; each
//! [`TrajectoryCursor`] owns its own [`StreamRng`], so cursors with distinct
//! seeds can run on different threads without coordination. Every step draws,
//! in order: one uniform for the action, one uniform for the next state and,
//! only when the noise level of `(s, a, s')` is positive, two uniforms for the
//! Gaussian reward noise.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::SpecError;
use crate::linalg::Matrix;
use crate::mdp::ProblemSpec;
use crate::rng::{mix_seed, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    /// Observed reward `r(s, a, s') + σ(s, a, s')·z`.
    pub reward: f64,
    /// `π(a|s) / π°(a|s)`.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    State(usize),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    spec: &'a ProblemSpec,
    ratios: Vec<f64>,
}

impl<'a> Simulator<'a> {
    /// Builds the sampling tables. The spec should already have passed
    /// validation; an uncovered target action is reported as an error here.
    pub fn new(spec: &'a ProblemSpec) -> Result<Self, SpecError> {
        let na = spec.n_actions();
        let mut ratios = vec![0.0; spec.n_states() * na];
        for s in 0..spec.n_states() {
            for a in 0..na {
                ratios[s * na + a] = spec.importance_ratio(s, a)?;
            }
        }
        Ok(Self { spec, ratios })
    }

    pub fn spec(&self) -> &'a ProblemSpec {
        self.spec
    }

    #[inline]
    pub fn rho(&self, s: usize, a: usize) -> f64 {
        self.ratios[s * self.spec.n_actions() + a]
    }

    /// Mean reward `r(s, a, s')` of a transition.
    #[inline]
    pub fn mean_reward(&self, tr: &Transition) -> f64 {
        self.spec.mdp.reward(tr.s, tr.a, tr.s_next)
    }

    pub fn start(&self, seed: u64, initial: &Initial) -> Result<TrajectoryCursor<'_, 'a>, SpecError> {
        let n = self.spec.n_states();
        let mut rng = StreamRng::from_seed(seed);
        let state = match initial {
            Initial::State(s) => {
                if *s >= n {
                    return Err(SpecError::StateOutOfRange { state: *s, n_states: n });
                }
                *s
            }
            Initial::Distribution(d) => {
                if d.len() != n {
                    return Err(SpecError::Dimension {
                        field: "initial".into(),
                        expected: n,
                        found: d.len(),
                    });
                }
                if d.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || d.iter().sum::<f64>() <= 0.0 {
                    return Err(SpecError::Invalid("initial distribution must be nonnegative with positive mass".into()));
                }
                rng.categorical(d)
            }
        };
        Ok(TrajectoryCursor {
            sim: self,
            rng,
            state,
            t: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryCursor<'s, 'a> {
    sim: &'s Simulator<'a>,
    rng: StreamRng,
    state: usize,
    t: u64,
}

impl<'s, 'a> TrajectoryCursor<'s, 'a> {
    pub fn state(&self) -> usize {
        self.state
    }

    /// Number of transitions taken so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn simulator(&self) -> &'s Simulator<'a> {
        self.sim
    }

    #[inline]
    pub fn step(&mut self) -> Transition {
        let spec = self.sim.spec;
        let s = self.state;
        let a = self.rng.categorical(spec.policies.behavior.row(s));
        let s_next = self.rng.categorical(spec.mdp.transition_row(s, a));
        let mut reward = spec.mdp.reward(s, a, s_next);
        let sigma = spec.mdp.noise_std(s, a, s_next);
        if sigma > 0.0 {
            reward += sigma * self.rng.standard_normal();
        }
        self.state = s_next;
        self.t += 1;
        Transition {
            s,
            a,
            s_next,
            reward,
            rho: self.sim.rho(s, a),
        }
    }
}

/// Fraction of time spent in each state over `S_0, ..., S_{steps-1}`.
pub fn empirical_state_frequencies(sim: &Simulator<'_>, seed: u64, initial: &Initial, steps: u64) -> Result<Vec<f64>, SpecError> {
    let mut cursor = sim.start(seed, initial)?;
    let mut counts = vec![0u64; sim.spec().n_states()];
    for _ in 0..steps {
        counts[cursor.state()] += 1;
        cursor.step();
    }
    Ok(counts.iter().map(|&c| c as f64 / steps.max(1) as f64).collect())
}

/// Which product a [`MartingaleCell`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductFamily {
    /// `ρ_k γ_{k+1} ··· ρ_{t-1} γ_t`, with mean matrix `P_πΓ`.
    Discount,
    /// `β_{k+1} ··· β_t` with `β_j = ρ_{j-1} γ_j λ_j`, mean matrix `P_πΓΛ`.
    Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleCell {
    pub family: ProductFamily,
    pub state: usize,
    /// `t - k`.
    pub lag: usize,
    pub empirical: f64,
    pub analytic: f64,
    pub std_err: f64,
    /// `(empirical - analytic) / std_err`; zero when both the error and the spread vanish.
    pub z: f64,
}

/// Compares Monte Carlo estimates of the conditional means of discounted
/// ratio products, started from each state, with the matrix powers
/// `((P_πΓ)^m 1)(s)` and `((P_πΓΛ)^m 1)(s)` for lags `m = 1..=horizon`.
pub fn martingale_identity_check(spec: &ProblemSpec, horizon: usize, samples: usize, seed: u64) -> Result<Vec<MartingaleCell>, SpecError> {
    let sim = Simulator::new(spec)?;
    let n = spec.n_states();
    let p_pi = spec.induced_matrix(&spec.policies.target);
    let p_gamma = &p_pi * spec.gamma_matrix();
    let p_gamma_lambda = &p_gamma * spec.lambda_matrix();

    let analytic = |a: &Matrix| -> Vec<Vec<f64>> {
        let mut x = crate::linalg::Vector::from_element(n, 1.0);
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            x = a * x;
            out.push(x.iter().copied().collect());
        }
        out
    };
    let exact_discount = analytic(&p_gamma);
    let exact_trace = analytic(&p_gamma_lambda);

    let mut cells = Vec::with_capacity(2 * n * horizon);
    for s0 in 0..n {
        // running sums of the product and of its square, per lag
        let mut sum = [vec![0.0; horizon], vec![0.0; horizon]];
        let mut sum_sq = [vec![0.0; horizon], vec![0.0; horizon]];
        for m in 0..samples {
            let mut cursor = sim.start(mix_seed(seed, (s0 * samples + m) as u64), &Initial::State(s0))?;
            let (mut disc, mut tr) = (1.0, 1.0);
            for lag in 0..horizon {
                let step = cursor.step();
                let g = spec.gamma(step.s_next);
                disc *= step.rho * g;
                tr *= step.rho * g * spec.lambda(step.s_next);
                sum[0][lag] += disc;
                sum_sq[0][lag] += disc * disc;
                sum[1][lag] += tr;
                sum_sq[1][lag] += tr * tr;
            }
        }
        for (fi, family) in [ProductFamily::Discount, ProductFamily::Trace].into_iter().enumerate() {
            let exact = if fi == 0 { &exact_discount } else { &exact_trace };
            for lag in 0..horizon {
                let mean = sum[fi][lag] / samples as f64;
                let var = (sum_sq[fi][lag] / samples as f64 - mean * mean).max(0.0);
                let std_err = libm::sqrt(var / samples as f64);
                let analytic = exact[lag][s0];
                let diff = mean - analytic;
                let z = if std_err > 0.0 {
                    diff / std_err
                } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
                    0.0
                } else {
                    f64::INFINITY.copysign(diff)
                };
                cells.push(MartingaleCell {
                    family,
                    state: s0,
                    lag: lag + 1,
                    empirical: mean,
                    analytic,
                    std_err,
                    z,
                });
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn cursors_are_reproducible() {
        let spec = scenarios::reference();
        let sim = Simulator::new(&spec).unwrap();
        let mut a = sim.start(42, &Initial::State(0)).unwrap();
        let mut b = sim.start(42, &Initial::State(0)).unwrap();
        for _ in 0..10_000 {
            assert_eq!(a.step(), b.step());
        }
    }

    #[test]
    fn start_rejects_bad_initial() {
        let spec = scenarios::reference();
        let sim = Simulator::new(&spec).unwrap();
        assert!(matches!(sim.start(0, &Initial::State(5)), Err(SpecError::StateOutOfRange { .. })));
        assert!(sim.start(0, &Initial::Distribution(vec![1.0])).is_err());
        assert!(sim.start(0, &Initial::Distribution(vec![0.0; 5])).is_err());
        let c = sim.start(0, &Initial::Distribution(vec![1.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(c.state(), 0);
    }

    #[test]
    fn deterministic_chain_is_known() {
        // target = behavior = always action 1, which moves to state 1
        let mut spec = scenarios::divergence();
        spec.policies.behavior = spec.policies.target.clone();
        let sim = Simulator::new(&spec).unwrap();
        let mut c = sim.start(7, &Initial::State(0)).unwrap();
        let first = c.step();
        assert_eq!(first, Transition { s: 0, a: 1, s_next: 1, reward: 1.0, rho: 1.0 });
        for t in 0..100 {
            let tr = c.step();
            assert_eq!((tr.s, tr.a, tr.s_next, tr.reward, tr.rho), (1, 1, 1, 1.0, 1.0));
            assert_eq!(c.t(), t + 2);
        }
    }

    #[test]
    fn ratios_follow_policies() {
        let spec = scenarios::reference();
        let sim = Simulator::new(&spec).unwrap();
        let mut c = sim.start(3, &Initial::State(0)).unwrap();
        for _ in 0..1000 {
            let tr = c.step();
            let expect = spec.policies.target.prob(tr.s, tr.a) / spec.policies.behavior.prob(tr.s, tr.a);
            assert_eq!(tr.rho, expect);
            assert!(tr.reward.is_finite());
        }
    }
}
