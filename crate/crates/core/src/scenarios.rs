//! Built-in problems and a random generator for property sweeps.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{FeatureMap, Mdp, Policy, PolicyPair, ProblemSpec, ScalarFunctions};
use crate::rng::StreamRng;

/// The canonical 5-state, 2-action problem used throughout the tests.
///
/// States 0–3 form a ring under action 0; action 1 jumps. State 4 is reached
/// only through action 1 from states 0 and 1, which the target policy never
/// takes there, so state 4 carries zero emphasis. State 2 has zero interest but
/// positive emphasis. The interest-carrying states 0, 1, 3 have linearly
/// independent features.
pub fn reference() -> ProblemSpec {
    let n = 5;
    let na = 2;
    let mut p = vec![0.0; n * na * n];
    let mut set = |s: usize, a: usize, s2: usize, v: f64| p[(s * na + a) * n + s2] = v;
    for s in 0..4 {
        set(s, 0, (s + 1) % 4, 0.8);
        set(s, 0, s, 0.2);
    }
    set(4, 0, 0, 1.0);
    set(0, 1, 4, 0.5);
    set(0, 1, 2, 0.5);
    set(1, 1, 4, 0.5);
    set(1, 1, 3, 0.5);
    set(2, 1, 0, 0.5);
    set(2, 1, 1, 0.5);
    set(3, 1, 0, 0.5);
    set(3, 1, 1, 0.5);
    set(4, 1, 4, 0.3);
    set(4, 1, 2, 0.7);

    // r(s, a, ·) depends on (s, a) only.
    let per_action = [[1.0, -0.5], [0.5, 0.0], [-1.0, 2.0], [0.0, 1.0], [0.0, 0.0]];
    let mut r = vec![0.0; n * na * n];
    for s in 0..n {
        for a in 0..na {
            for s2 in 0..n {
                r[(s * na + a) * n + s2] = per_action[s][a];
            }
        }
    }
    let noise = vec![1.0; n * na * n];

    let target = vec![1.0, 0.0, 1.0, 0.0, 0.6, 0.4, 0.5, 0.5, 0.5, 0.5];
    let behavior = vec![0.6, 0.4, 0.7, 0.3, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
    let phi = vec![
        1.0, 0.0, 0.5, //
        0.0, 1.0, 0.5, //
        0.5, 0.5, 0.0, //
        0.0, 0.0, 1.0, //
        1.0, 1.0, 1.0,
    ];
    build(
        n,
        na,
        p,
        r,
        Some(noise),
        target,
        behavior,
        vec![0.9, 0.7, 0.95, 0.9, 0.7],
        vec![0.5, 0.0, 0.9, 0.5, 0.0],
        vec![1.0, 2.0, 0.0, 1.0, 0.0],
        3,
        phi,
    )
}

/// The reference problem with every interest set to 1.
pub fn reference_positive_interest() -> ProblemSpec {
    let mut spec = reference();
    spec.scalars.interest = vec![1.0; spec.n_states()];
    spec
}

/// Two states, one feature with `φ = (1, 2)`; action 0 moves to state 0 and
/// action 1 to state 1 from anywhere. The target always takes action 1, the
/// behavior policy flips a fair coin. Off-policy TD(0) with unit emphasis has
/// an unstable mean update here while the emphatic weighting stays stable.
pub fn divergence() -> ProblemSpec {
    let n = 2;
    let na = 2;
    let mut p = vec![0.0; n * na * n];
    for s in 0..n {
        p[(s * na) * n] = 1.0;
        p[(s * na + 1) * n + 1] = 1.0;
    }
    let mut r = vec![0.0; n * na * n];
    for s in 0..n {
        r[(s * na + 1) * n + 1] = 1.0;
    }
    build(
        n,
        na,
        p,
        r,
        None,
        vec![0.0, 1.0, 0.0, 1.0],
        vec![0.5, 0.5, 0.5, 0.5],
        vec![0.9, 0.9],
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        1,
        vec![1.0, 2.0],
    )
}

/// One state, two self-loop actions. The target always takes action 0, the
/// behavior takes it with probability `q`. Interest is zero, so the follow-on
/// trace only carries its initial value forward: `F_t = γ ρ_{t-1} F_{t-1}`.
pub fn one_state_ratio(q: f64, gamma: f64, reward: f64) -> ProblemSpec {
    build(
        1,
        2,
        vec![1.0, 1.0],
        vec![reward, reward],
        None,
        vec![1.0, 0.0],
        vec![q, 1.0 - q],
        vec![gamma],
        vec![0.0],
        vec![0.0],
        1,
        vec![1.0],
    )
}

/// On-policy tabular problem: `Φ = I`, `π = π°`, unit interest, constant γ.
/// Transitions and rewards are drawn from `seed`.
pub fn tabular_on_policy(n_states: usize, gamma: f64, seed: u64) -> ProblemSpec {
    let mut rng = StreamRng::from_seed(seed);
    let na = 2;
    let n = n_states;
    let mut p = Vec::with_capacity(n * na * n);
    for _ in 0..n * na {
        let row: Vec<f64> = (0..n).map(|_| 0.1 + rng.uniform()).collect();
        let total: f64 = row.iter().sum();
        p.extend(row.iter().map(|x| x / total));
    }
    let r: Vec<f64> = (0..n * na * n).map(|_| 2.0 * rng.uniform() - 1.0).collect();
    let mut policy = Vec::with_capacity(n * na);
    for _ in 0..n {
        let x = 0.2 + 0.6 * rng.uniform();
        policy.extend([x, 1.0 - x]);
    }
    let mut phi = vec![0.0; n * n];
    for s in 0..n {
        phi[s * n + s] = 1.0;
    }
    build(
        n,
        na,
        p,
        r,
        None,
        policy.clone(),
        policy,
        vec![gamma; n],
        vec![0.5; n],
        vec![1.0; n],
        n,
        phi,
    )
}

#[allow(clippy::too_many_arguments)]
fn build(
    n: usize,
    na: usize,
    p: Vec<f64>,
    r: Vec<f64>,
    noise: Option<Vec<f64>>,
    target: Vec<f64>,
    behavior: Vec<f64>,
    gamma: Vec<f64>,
    lambda: Vec<f64>,
    interest: Vec<f64>,
    n_features: usize,
    phi: Vec<f64>,
) -> ProblemSpec {
    ProblemSpec::new(
        Mdp::new(n, na, p, r, noise).expect("built-in mdp shape"),
        PolicyPair {
            target: Policy::new(n, na, target, "policies.target").expect("built-in target shape"),
            behavior: Policy::new(n, na, behavior, "policies.behavior").expect("built-in behavior shape"),
        },
        ScalarFunctions { gamma, lambda, interest },
        FeatureMap::new(n, n_features, phi).expect("built-in feature shape"),
    )
    .expect("built-in spec shape")
}

/// Knobs for [`random_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpecOptions {
    pub max_states: usize,
    pub max_actions: usize,
    /// Weight of the uniform distribution mixed into the behavior policy;
    /// bounds every ratio by `1 / (behavior_floor / n_actions)`.
    pub behavior_floor: f64,
    /// Draw every interest from `[0.1, 2]` instead of allowing zeros.
    pub positive_interest: bool,
    /// Probability of planting a zero-emphasis state (possibly with a
    /// feature direction only that state spans, which makes `C` singular).
    pub degenerate_prob: f64,
    pub max_gamma: f64,
}

impl Default for RandomSpecOptions {
    fn default() -> Self {
        Self {
            max_states: 6,
            max_actions: 3,
            behavior_floor: 0.2,
            positive_interest: false,
            degenerate_prob: 0.25,
            max_gamma: 0.99,
        }
    }
}

/// Draws a random problem that passes validation.
pub fn random_spec(rng: &mut StreamRng, opts: &RandomSpecOptions) -> ProblemSpec {
    loop {
        if let Some(spec) = try_random_spec(rng, opts) {
            if spec.validate().passed() {
                return spec;
            }
        }
    }
}

fn normalized(rng: &mut StreamRng, len: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let row: Vec<f64> = (0..len)
            .map(|_| if rng.uniform() < zero_prob { 0.0 } else { rng.uniform() })
            .collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            let mut out: Vec<f64> = row.iter().map(|x| x / total).collect();
            fix_sum(&mut out);
            return out;
        }
    }
}

/// Pushes the rounding residue into the largest entry so rows sum to 1 within an ulp.
fn fix_sum(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    let imax = (0..row.len())
        .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
        .unwrap();
    row[imax] += 1.0 - total;
}

fn try_random_spec(rng: &mut StreamRng, opts: &RandomSpecOptions) -> Option<ProblemSpec> {
    let n = 2 + rng.below(opts.max_states.max(2) - 1);
    let na = 1 + rng.below(opts.max_actions.max(1));
    let n_features = 1 + rng.below(n);
    let degenerate = na >= 2 && rng.uniform() < opts.degenerate_prob;
    let hidden = rng.below(n);

    let mut p = Vec::with_capacity(n * na * n);
    for s in 0..n {
        for a in 0..na {
            let mut row = normalized(rng, n, 0.35);
            if degenerate && a == 0 && s != hidden {
                // action 0 never enters the hidden state
                if row[hidden] == 1.0 {
                    row[(hidden + 1) % n] = 1.0;
                }
                row[hidden] = 0.0;
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= total);
                fix_sum(&mut row);
            }
            p.extend(row);
        }
    }

    let mut behavior = Vec::with_capacity(n * na);
    let mut target = Vec::with_capacity(n * na);
    for s in 0..n {
        let raw = normalized(rng, na, 0.0);
        let mut b: Vec<f64> = raw
            .iter()
            .map(|x| (1.0 - opts.behavior_floor) * x + opts.behavior_floor / na as f64)
            .collect();
        fix_sum(&mut b);
        behavior.extend(b);
        let t = if degenerate && s != hidden {
            let mut t = vec![0.0; na];
            t[0] = 1.0;
            t
        } else if rng.uniform() < 0.3 {
            let mut t = vec![0.0; na];
            t[rng.below(na)] = 1.0;
            t
        } else {
            normalized(rng, na, 0.3)
        };
        target.extend(t);
    }

    let r: Vec<f64> = (0..n * na * n).map(|_| 2.0 * rng.standard_normal()).collect();
    let noise: Vec<f64> = if rng.uniform() < 0.5 {
        vec![0.0; n * na * n]
    } else {
        (0..n * na * n).map(|_| rng.uniform()).collect()
    };

    let gamma: Vec<f64> = (0..n)
        .map(|_| match rng.below(6) {
            0 => 0.0,
            1 => opts.max_gamma,
            _ => opts.max_gamma * rng.uniform(),
        })
        .collect();
    let lambda: Vec<f64> = (0..n)
        .map(|_| match rng.below(5) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.uniform(),
        })
        .collect();
    let mut interest: Vec<f64> = (0..n)
        .map(|_| {
            if !opts.positive_interest && rng.uniform() < 0.3 {
                0.0
            } else {
                0.1 + 1.9 * rng.uniform()
            }
        })
        .collect();
    if degenerate {
        interest[hidden] = 0.0;
    }

    let mut phi: Vec<f64> = (0..n * n_features).map(|_| rng.standard_normal()).collect();
    if degenerate && rng.uniform() < 0.5 {
        // the last feature direction is carried by the hidden state alone
        for s in 0..n {
            for k in 0..n_features {
                let v = if s == hidden {
                    if k + 1 == n_features {
                        1.0
                    } else {
                        0.0
                    }
                } else if k + 1 == n_features {
                    0.0
                } else {
                    phi[s * n_features + k]
                };
                phi[s * n_features + k] = v;
            }
        }
    }

    let mdp = Mdp::new(n, na, p, r, Some(noise)).ok()?;
    ProblemSpec::new(
        mdp,
        PolicyPair {
            target: Policy::new(n, na, target, "policies.target").ok()?,
            behavior: Policy::new(n, na, behavior, "policies.behavior").ok()?,
        },
        ScalarFunctions { gamma, lambda, interest },
        FeatureMap::new(n, n_features, phi).ok()?,
    )
    .ok()
}
