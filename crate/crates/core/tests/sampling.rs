use etdlab_core::oracle::AnalyticSolution;
use etdlab_core::rng::{mix_seed, StreamRng};
use etdlab_core::scenarios::{self, RandomSpecOptions};
use etdlab_core::trajectory::{empirical_state_frequencies, martingale_identity_check, Initial, ProductFamily, Simulator};
use proptest::prelude::*;

#[test]
fn seed_zero_stream_is_pinned() {
    // xoshiro256** seeded through SplitMix64, checked against an independent implementation.
    assert_eq!(StreamRng::from_seed(0).next_u64(), 0x99EC_5F36_CB75_F2B4);
}

#[test]
fn state_frequencies_approach_stationary_distribution() {
    let spec = scenarios::reference();
    let sol = AnalyticSolution::compute(&spec).unwrap();
    let sim = Simulator::new(&spec).unwrap();
    let freq = empirical_state_frequencies(&sim, 11, &Initial::State(0), 10_000_000).unwrap();
    let tv: f64 = 0.5 * freq.iter().zip(sol.d_behavior.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv < 1e-3, "total variation {tv}");
}

#[test]
fn behavior_actions_pass_chi_square() {
    let spec = scenarios::reference();
    let sim = Simulator::new(&spec).unwrap();
    let mut cursor = sim.start(5, &Initial::State(0)).unwrap();
    let (n, na) = (spec.n_states(), spec.n_actions());
    let mut counts = vec![0u64; n * na];
    for _ in 0..200_000 {
        let tr = cursor.step();
        counts[tr.s * na + tr.a] += 1;
    }
    // every state has two behavior actions: df = 5
    let mut chi2 = 0.0;
    for s in 0..n {
        let visits: u64 = counts[s * na..(s + 1) * na].iter().sum();
        for a in 0..na {
            let expected = visits as f64 * spec.policies.behavior.prob(s, a);
            if expected > 0.0 {
                let d = counts[s * na + a] as f64 - expected;
                chi2 += d * d / expected;
            }
        }
    }
    // 99.9% quantile of χ²(5) is 20.5
    assert!(chi2 < 20.5, "chi-square {chi2}");
}

#[test]
fn one_step_discounted_ratio_mean() {
    let spec = scenarios::reference();
    let sim = Simulator::new(&spec).unwrap();
    let p_pi = spec.induced_matrix(&spec.policies.target);
    for s0 in 0..spec.n_states() {
        let exact: f64 = (0..spec.n_states()).map(|s2| p_pi[(s0, s2)] * spec.gamma(s2)).sum();
        let runs = 100_000;
        let mut sum = 0.0;
        for m in 0..runs {
            let tr = sim.start(mix_seed(99, (s0 * runs + m) as u64), &Initial::State(s0)).unwrap().step();
            sum += tr.rho * spec.gamma(tr.s_next);
        }
        let est = sum / runs as f64;
        // ργ ≤ 1.5 here, so the standard error is below 0.005
        assert!((est - exact).abs() < 0.04, "state {s0}: {est} vs {exact}");
    }
}

#[test]
fn discounted_ratio_products_have_matrix_power_means() {
    let spec = scenarios::reference();
    let cells = martingale_identity_check(&spec, 3, 40_000, 2024).unwrap();
    assert_eq!(cells.len(), 2 * spec.n_states() * 3);
    for c in &cells {
        assert!(c.z.abs() < 4.0, "{:?} state {} lag {}: {} vs {} (z = {})", c.family, c.state, c.lag, c.empirical, c.analytic, c.z);
    }
    assert!(cells.iter().any(|c| c.family == ProductFamily::Trace && c.analytic > 0.0));
}

#[test]
fn product_means_never_exceed_discount_bound() {
    // E[ρ_0γ_1···ρ_{m-1}γ_m | S_0 = s] ≤ (max γ)^m
    let spec = scenarios::reference();
    let cells = martingale_identity_check(&spec, 6, 1, 3).unwrap();
    let g = spec.scalars.gamma.iter().copied().fold(0.0, f64::max);
    for c in cells.iter().filter(|c| c.family == ProductFamily::Discount) {
        assert!(c.analytic <= g.powi(c.lag as i32) + 1e-12);
    }
}

#[test]
fn noise_is_drawn_only_when_present() {
    // Without noise each step consumes exactly two uniforms: action, then next state.
    let noisy = scenarios::reference();
    let quiet = {
        let mut s = noisy.clone();
        s.mdp = etdlab_core::mdp::Mdp::new(s.n_states(), s.n_actions(), s.mdp.transition_table().to_vec(), s.mdp.reward_table().to_vec(), None).unwrap();
        s
    };
    let sim_q = Simulator::new(&quiet).unwrap();
    let mut a = sim_q.start(8, &Initial::State(0)).unwrap();
    let mut rng = StreamRng::from_seed(8);
    for _ in 0..1000 {
        let tr = a.step();
        let u1 = rng.uniform();
        let u2 = rng.uniform();
        assert_eq!(tr.a, etdlab_core::rng::sample_index(quiet.policies.behavior.row(tr.s), u1));
        assert_eq!(tr.s_next, etdlab_core::rng::sample_index(quiet.mdp.transition_row(tr.s, tr.a), u2));
        assert_eq!(tr.reward, quiet.mdp.reward(tr.s, tr.a, tr.s_next));
    }
    let sim_n = Simulator::new(&noisy).unwrap();
    let mut c = sim_n.start(8, &Initial::State(0)).unwrap();
    let trs: Vec<_> = (0..1000).map(|_| c.step()).collect();
    assert!(trs.iter().all(|tr| tr.reward != noisy.mdp.reward(tr.s, tr.a, tr.s_next)));
    let mean_noise = trs.iter().map(|tr| tr.reward - noisy.mdp.reward(tr.s, tr.a, tr.s_next)).sum::<f64>() / 1000.0;
    assert!(mean_noise.abs() < 0.15, "{mean_noise}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_seed_same_stream(spec_seed in any::<u64>(), seed in any::<u64>()) {
        let spec = scenarios::random_spec(&mut StreamRng::from_seed(spec_seed), &RandomSpecOptions::default());
        let sim = Simulator::new(&spec).unwrap();
        let mut a = sim.start(seed, &Initial::State(0)).unwrap();
        let mut b = sim.start(seed, &Initial::State(0)).unwrap();
        for _ in 0..200 {
            let (x, y) = (a.step(), b.step());
            prop_assert_eq!(x, y);
            prop_assert!(spec.policies.behavior.prob(x.s, x.a) > 0.0);
            prop_assert!(spec.mdp.p(x.s, x.a, x.s_next) > 0.0);
            prop_assert_eq!(x.rho, spec.policies.target.prob(x.s, x.a) / spec.policies.behavior.prob(x.s, x.a));
        }
    }
}
