use etdlab_core::linalg::{self, Matrix, Vector};
use etdlab_core::mdp::ProblemSpec;
use etdlab_core::oracle::{self, AnalyticSolution};
use etdlab_core::rng::StreamRng;
use etdlab_core::scenarios::{self, RandomSpecOptions};
use proptest::prelude::*;

fn spec_from(seed: u64, opts: &RandomSpecOptions) -> ProblemSpec {
    scenarios::random_spec(&mut StreamRng::from_seed(seed), opts)
}

fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(v))
}

/// `Σ_{k<terms} Aᵏ`.
fn series(a: &Matrix, terms: usize) -> Matrix {
    let n = a.nrows();
    let (mut acc, mut power) = (Matrix::identity(n, n), Matrix::identity(n, n));
    for _ in 1..terms {
        power = &power * a;
        acc += &power;
    }
    acc
}

/// Triple loop over `P(s'|s,a)π(a|s)`, independent of the matrix helpers.
fn induced(spec: &ProblemSpec, target: bool) -> Matrix {
    let n = spec.n_states();
    let policy = if target { &spec.policies.target } else { &spec.policies.behavior };
    Matrix::from_fn(n, n, |s, s2| (0..spec.n_actions()).map(|a| policy.prob(s, a) * spec.mdp.p(s, a, s2)).sum())
}

fn rel_gap(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn value_function_solves_both_bellman_forms(seed in any::<u64>()) {
        let spec = spec_from(seed, &RandomSpecOptions::default());
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let n = spec.n_states();
        let v = &sol.v_pi;
        let one_step = &sol.r_pi + &sol.p_pi * diag(&spec.scalars.gamma) * v - v;
        prop_assert!(linalg::inf_norm(&one_step) < 1e-9);
        prop_assert!(sol.bellman_residual() < 1e-9);
        prop_assert!((&sol.p_pi - induced(&spec, true)).abs().max() < 1e-14);
        prop_assert_eq!(sol.d_behavior.len(), n);
    }

    #[test]
    fn stationary_distribution_is_invariant(seed in any::<u64>()) {
        let spec = spec_from(seed, &RandomSpecOptions::default());
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let p = induced(&spec, false);
        let d = &sol.d_behavior;
        prop_assert!((d.sum() - 1.0).abs() < 1e-12);
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        prop_assert!(linalg::inf_norm(&(p.transpose() * d - d)) < 1e-10);
    }

    #[test]
    fn limits_match_series_evaluation(seed in any::<u64>()) {
        let opts = RandomSpecOptions { max_gamma: 0.85, ..RandomSpecOptions::default() };
        let spec = spec_from(seed, &opts);
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let n = spec.n_states();
        let id = Matrix::identity(n, n);
        let pg = induced(&spec, true) * diag(&spec.scalars.gamma);
        let pgl = &pg * diag(&spec.scalars.lambda);
        let sum_gl = series(&pgl, 200);
        let p_lambda = &sum_gl * &pg * (&id - diag(&spec.scalars.lambda));
        prop_assert!(rel_gap(&sol.p_lambda, &p_lambda) < 1e-9);
        // m̄ᵀ = d_iᵀ Σ_k (P^λ)ᵏ, summed directly in P^λ.
        let d_i = sol.d_behavior.component_mul(&Vector::from_column_slice(&spec.scalars.interest));
        let mut m_bar = d_i.clone();
        let mut term = d_i.transpose();
        for _ in 0..3000 {
            term = &term * &p_lambda;
            m_bar += term.transpose();
        }
        prop_assert!(linalg::inf_norm(&(&m_bar - &sol.m_bar)) <= 1e-8 * linalg::inf_norm(&sol.m_bar).max(1.0));
    }

    #[test]
    fn emphasis_solves_both_forms(seed in any::<u64>()) {
        let spec = spec_from(seed, &RandomSpecOptions::default());
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let chain = oracle::induced_chain(&spec);
        let direct = oracle::emphasis_weights_direct(&spec, &chain, &sol.d_interest).unwrap();
        prop_assert!(linalg::inf_norm(&(&direct - &sol.m_bar)) <= 1e-9 * linalg::inf_norm(&sol.m_bar).max(1.0));
        // m̄ ≥ d_i entrywise
        for s in 0..spec.n_states() {
            prop_assert!(sol.m_bar[s] >= sol.d_interest[s] - 1e-12);
        }
    }

    #[test]
    fn c_is_negative_semidefinite(seed in any::<u64>()) {
        let spec = spec_from(seed, &RandomSpecOptions::default());
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let sym = (&sol.c + sol.c.transpose()) * 0.5;
        let top = sym.symmetric_eigenvalues().max();
        prop_assert!(top <= 1e-10, "max eig {}", top);
        let g = sol.symmetric_g();
        let low = g.g.clone().symmetric_eigenvalues().min();
        prop_assert!(low >= -1e-10 * g.g.abs().max().max(1.0), "min eig G {}", low);
        for &s in &g.zero_states {
            prop_assert!(sol.m_bar[s] <= oracle::ZERO_EMPHASIS_TOL);
        }
    }

    #[test]
    fn rank_test_agrees_with_singularity(seed in any::<u64>()) {
        let opts = RandomSpecOptions { degenerate_prob: 0.5, ..RandomSpecOptions::default() };
        let spec = spec_from(seed, &opts);
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let sv = sol.c.clone().svd(false, false).singular_values;
        let nonsingular = sv.max() > 0.0 && sv.min() > 1e-10 * sv.max();
        prop_assert_eq!(sol.report.condition_14_holds, nonsingular);
        prop_assert_eq!(sol.theta_star.is_some(), nonsingular);
        // the features of states with positive emphasis must span
        let phi = spec.features.matrix();
        let kept: Vec<usize> = (0..spec.n_states()).filter(|&s| sol.m_bar[s] > oracle::ZERO_EMPHASIS_TOL).collect();
        let rows = Matrix::from_fn(kept.len(), spec.n_features(), |i, j| phi[(kept[i], j)]);
        let full_rank = kept.len() >= spec.n_features() && linalg::numerical_rank(&rows, 1e-10) == spec.n_features();
        prop_assert_eq!(full_rank, nonsingular);
    }

    #[test]
    fn positive_interest_gives_negative_definite_c(seed in any::<u64>()) {
        let opts = RandomSpecOptions { positive_interest: true, degenerate_prob: 0.0, ..RandomSpecOptions::default() };
        let spec = spec_from(seed, &opts);
        let sol = AnalyticSolution::compute(&spec).unwrap();
        prop_assert!(sol.report.min_sym_eig > 0.0);
        prop_assert!(sol.report.radius_threshold.is_finite());
        let theta = sol.theta_star.as_ref().unwrap();
        // ‖θ*‖₂ ≤ ‖b‖₂ / c
        prop_assert!(theta.norm() <= sol.report.radius_threshold * (1.0 + 1e-9));
    }

    #[test]
    fn theta_solves_projected_fixed_point(seed in any::<u64>()) {
        let spec = spec_from(seed, &RandomSpecOptions::default());
        let sol = AnalyticSolution::compute(&spec).unwrap();
        let (Some(theta), Some(proj)) = (&sol.theta_star, &sol.projection) else {
            return Ok(());
        };
        prop_assert!((proj * proj - proj).abs().max() < 1e-8);
        let residual = &sol.c * theta + &sol.b;
        prop_assert!(linalg::inf_norm(&residual) < 1e-8 * (sol.c.abs().max() * linalg::inf_norm(theta) + linalg::inf_norm(&sol.b) + 1.0));
        prop_assert!(sol.fixed_point_residual(&spec.features.matrix()).unwrap() < 1e-8);
    }

    #[test]
    fn ratios_average_to_one_under_behavior(seed in any::<u64>()) {
        let spec = spec_from(seed, &RandomSpecOptions::default());
        for s in 0..spec.n_states() {
            let mean: f64 = (0..spec.n_actions())
                .map(|a| spec.policies.behavior.prob(s, a) * spec.importance_ratio(s, a).unwrap())
                .sum();
            prop_assert!((mean - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn reference_values_match_independent_solve() {
    let sol = AnalyticSolution::compute(&scenarios::reference()).unwrap();
    let theta = sol.theta_star.unwrap();
    let expect = [1.95775818949, 1.615539488876, 3.225495874327];
    for (t, e) in theta.iter().zip(expect) {
        assert!((t - e).abs() < 1e-9, "{t} vs {e}");
    }
    assert!((sol.report.min_sym_eig - 0.384596345003).abs() < 1e-9);
    assert!((sol.report.radius_threshold - 6.768710044031467).abs() < 1e-9);
    assert_eq!(sol.report.j0, vec![4]);
    assert_eq!(sol.report.j, vec![2, 4]);
}

#[test]
fn truncation_bound_decreases_in_window() {
    let spec = scenarios::reference();
    let sol = AnalyticSolution::compute(&spec).unwrap();
    let totals: Vec<f64> = [0, 1, 2, 5, 10, 20, 50].iter().map(|&k| oracle::truncation_bound(&spec, &sol, k, 2.0, 2.0).total()).collect();
    assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
    assert!(totals.iter().all(|x| x.is_finite() && *x > 0.0));
}
