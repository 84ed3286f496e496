use proptest::prelude::*;
use torus_puzzle::chains::{build_matrix, home_cell, ChainSpec, MarginalState, DEFAULT_STATE_CAP};
use torus_puzzle::renewal_lab::*;
use torus_puzzle::rng::trial_rng;
use torus_puzzle::spectral_lab::partial_trace_moment;
use torus_puzzle::torus_core::{return_probabilities, PotentialTable, TorusPoint};

#[test]
fn planar_constants() {
    let c = RenewalConstants::planar();
    assert!((c.s2 - 1.28499).abs() < 5e-5);
    assert!((c.mu_over_n2 - 3.43994).abs() < 5e-5);
    assert!((c.c_puz - 5.35398).abs() < 5e-5);
    assert!((C_PUZ - 5.35398).abs() < 5e-6);
    assert!((2.0 * c.mu_over_n2 / c.s2 - c.c_puz).abs() < 1e-12);
}

#[test]
fn renewal_times_alternate() {
    let (rec, swaps) = track_renewals_logged(6, 300, trial_rng(3, 0), true).unwrap();
    assert_eq!(rec.pairs(), 300);
    assert!(rec.alternation_holds(&swaps));
    assert!(rec.t.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn renewal_moments_match_finite_n_theory() {
    let n = 12;
    let rec = track_renewals(n, 20_000, trial_rng(11, 0)).unwrap();
    let m = renewal_moments(&rec).unwrap();
    let theory = RenewalConstants::from_returns(&return_probabilities(&PotentialTable::new(n).unwrap()), Some(n));
    let mu = m.mu_over_n2(n);
    // finite-n theory and simulation differ by lower-order terms; 4 se plus 2%
    assert!((m.s2.value - theory.s2).abs() < 4.0 * m.s2.se + 0.02 * theory.s2, "{:?} vs {}", m.s2, theory.s2);
    assert!((mu.value - theory.mu_over_n2).abs() < 4.0 * mu.se + 0.02 * theory.mu_over_n2);
    assert!((m.c_puz_hat.value - theory.c_puz).abs() < 4.0 * m.c_puz_hat.se + 0.02 * theory.c_puz);
    assert!(m.mean_h.value.abs() < 4.0 * m.mean_h.se);
}

#[test]
fn renewal_moments_need_enough_pairs() {
    let rec = track_renewals(6, 100, trial_rng(1, 0)).unwrap();
    assert!(renewal_moments(&rec).is_err());
}

/// Exact law of the tracked piece's displacement from its home cell, by
/// pushing the sorted start through the marginal chain.
fn exact_piece_law(n: u32, steps: u32) -> Vec<f64> {
    let chain = build_matrix(ChainSpec::Marginal { d: 1 }, n, DEFAULT_STATE_CAP).unwrap();
    let start = chain.index_of(&MarginalState::sorted(n, 1).encode()).unwrap();
    let mut mu = nalgebra::DVector::<f64>::zeros(chain.len());
    mu[start] = 1.0;
    let pt = chain.p.transpose();
    for _ in 0..steps {
        mu = &pt * mu;
    }
    let home = home_cell(1, n);
    let mut law = vec![0.0; (n * n) as usize];
    for (i, code) in chain.states.iter().enumerate() {
        let piece = TorusPoint::from_index(code[0] as usize, n);
        law[piece.sub(home).index()] += mu[i];
    }
    law
}

#[test]
fn single_piece_simulation_matches_exact_chain() {
    let (n, steps, trials) = (4u32, 40u64, 40_000u64);
    let exact = exact_piece_law(n, steps as u32);
    let sim = single_piece_law(n, steps, trials, 5).unwrap();
    assert_eq!(sim.counts.iter().sum::<u64>(), trials);
    let floor = plugin_tv_floor(&exact, trials, 20, 77);
    let tv = sim.tv_to(&exact);
    assert!(tv < floor.value + 4.0 * floor.se, "tv {tv} vs floor {floor:?}");
}

#[test]
fn single_piece_law_at_zero_steps_is_a_point_mass() {
    let sim = single_piece_law(5, 0, 100, 1).unwrap();
    assert_eq!(sim.counts[0], 100);
}

#[test]
fn fixed_point_mean_matches_exact_partial_trace() {
    let (n, steps) = (3u32, 12u32);
    let exact = partial_trace_moment(n, 1, steps, DEFAULT_STATE_CAP).unwrap().power;
    let r = fixed_point_experiment(n, steps as u64, 20_000, 8).unwrap();
    assert!((r.mean.value - exact).abs() < 4.0 * r.mean.se, "{:?} vs {exact}", r.mean);
    assert!((r.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn poisson_pmf_is_normalised() {
    let s: f64 = (0..60).map(|k| poisson_pmf(1.0, k)).sum();
    assert!((s - 1.0).abs() < 1e-14);
    assert!((poisson_pmf(1.0, 0) - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn scaled_steps_floor() {
    assert_eq!(scaled_steps(10, 0.1), (C_PUZ * 1000.0).floor() as u64);
    assert_eq!(scaled_steps(10, 0.0), 0);
}

#[test]
fn uniform_floor_scales_like_inverse_root() {
    let law = vec![1.0 / 400.0; 400];
    let a = plugin_tv_floor(&law, 10_000, 10, 1).value;
    let b = plugin_tv_floor(&law, 40_000, 10, 1).value;
    assert!((a / b - 2.0).abs() < 0.15, "{a} {b}");
}

fn law_strategy() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, 2..30).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn total_variation_is_a_metric(a in law_strategy(), seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 0);
        let counts = multinomial(&a, 500, &mut rng);
        prop_assert_eq!(counts.iter().sum::<u64>(), 500);
        let b: Vec<f64> = counts.iter().map(|&c| c as f64 / 500.0).collect();
        let d = total_variation(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - total_variation(&b, &a)).abs() < 1e-15);
        prop_assert!(total_variation(&a, &a) == 0.0);
    }

    #[test]
    fn mean_estimate_of_constants(c in -1e3f64..1e3, k in 2usize..50) {
        let e = mean_estimate(&vec![c; k]);
        prop_assert!((e.value - c).abs() < 1e-9 * c.abs().max(1.0));
        prop_assert!(e.se.abs() < 1e-9 * c.abs().max(1.0));
    }
}
