use num_complex::Complex64;
use proptest::prelude::*;
use torus_puzzle::chains::{build_matrix, ChainSpec, MarginalState, DEFAULT_STATE_CAP};
use torus_puzzle::spectral_lab::*;

const CAP: usize = DEFAULT_STATE_CAP;

#[test]
fn hitting_transform_is_a_probability_generating_function() {
    for n in [5u32, 8, 13] {
        let m = ResolventModel::new(n).unwrap();
        let chi = hitting_char_at(&m, Complex64::new(1.0, 0.0)).unwrap();
        assert!((chi - 1.0).norm() < 1e-12);
        // |E z^T| <= 1 on the unit circle
        for xi in [0.01, 0.1, 0.3, 0.5] {
            assert!(hitting_char_fun(&m, xi).unwrap().norm() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn expected_hitting_time_from_return_time_identity() {
    // Kac: the non-lazy return time is n^2 = 1 + E_(1,0) T_0; laziness
    // scales everything by 5/4.
    for n in [4u32, 8, 16] {
        let m = ResolventModel::new(n).unwrap();
        let want = 1.25 * ((n * n) as f64 - 1.0);
        assert!((expected_hitting_time(&m).unwrap() - want).abs() < 1e-8 * want);
        assert!((expected_hitting_time_complex_step(&m).unwrap() - want).abs() < 1e-6 * want);
    }
}

#[test]
fn monte_carlo_hitting_and_return_times() {
    let n = 6;
    let want = 1.25 * 35.0;
    let h = mc_hitting_time(n, 200_000, 4).unwrap();
    assert!((h.value - want).abs() < 4.0 * h.se, "{h:?}");
    let r = mc_return_time(n, 200_000, 5).unwrap();
    assert!((r.value - 45.0).abs() < 4.0 * r.se, "{r:?}");
}

#[test]
fn resolvent_model_bounds() {
    assert!(ResolventModel::new(2).is_err());
    assert!(ResolventModel::new(41).is_err());
    let m = ResolventModel::new(5).unwrap();
    assert_eq!(m.dim(), 24);
    assert_eq!(m.index_of(0, 0), None);
}

#[test]
fn eigen_sums_at_small_n() {
    let s = eigen_sums(&SpectrumSummary::of(&ResolventModel::new(8).unwrap()));
    assert!((s.overlap_mass - 1.0).abs() < 1e-10);
    assert!(s.lambda_max < 1.0 && s.lambda_min > -1.0);
    assert!((1.25..5.0).contains(&s.s1));
    let mut buf = Vec::new();
    SpectrumSummary::of(&ResolventModel::new(4).unwrap()).write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 15);
}

#[test]
fn joint_transform_two_ways() {
    let m = ResolventModel::new(9).unwrap();
    assert!((joint_char_fun(&m, 0, 0.0).unwrap() - 1.0).norm() < 1e-12);
    for (xi1, xi2) in [(1, 0.0), (2, 0.01), (-3, 0.2), (4, 0.5)] {
        let a = joint_char_fun(&m, xi1, xi2).unwrap();
        let b = joint_char_fun_literal(&m, xi1, xi2).unwrap();
        assert!((a - b).norm() < 1e-10);
        assert!(a.norm() <= 1.0 + 1e-12);
    }
    let bound = joint_char_bound(&m, &[0.0, 0.05, 0.1, 0.25, 0.5]).unwrap();
    assert!(bound.c_fit > 0.0 && bound.max_modulus < 1.0);
}

#[test]
fn d2_identity_averaged_over_starts() {
    let chain = build_matrix(ChainSpec::Marginal { d: 1 }, 3, CAP).unwrap();
    let start = chain.index_of(&MarginalState::sorted(3, 1).encode()).unwrap();
    for steps in [0u32, 1, 5, 20] {
        let c = d2_identity_check(&chain, start, steps).unwrap();
        assert!((c.lhs_average - c.rhs).abs() < 1e-10);
        assert!(c.tv <= 0.5 * c.lhs.sqrt() + 1e-12);
    }
    let c0 = d2_identity_check(&chain, start, 0).unwrap();
    assert!((c0.lhs - (chain.len() as f64 - 1.0)).abs() < 1e-9);
    assert!(d2_identity_check(&chain, chain.len(), 1).is_err());
}

#[test]
fn product_walk_spectrum_closed_form() {
    for (n, d, range) in [(5u32, 1usize, 1u32), (5, 1, 2), (3, 1, 1)] {
        let a = pdm_spectrum(n, d, range, CAP).unwrap();
        let b = build_matrix(ChainSpec::ProductWalk { d, range }, n, CAP).unwrap().eigenvalues().unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
    assert!(pdm_spectrum(4, 1, 2, CAP).is_err());
    let s = pdm_spectrum(5, 1, 1, CAP).unwrap();
    let sums: Vec<f64> = [1.0, 3.0, 10.0, 50.0].iter().map(|&c| pdm_spectral_sum(&s, 5, 1, c)).collect();
    assert!(sums.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn dirichlet_form_rejects_bad_measure() {
    let p = build_matrix(ChainSpec::LazySrw, 3, CAP).unwrap();
    let mut pi = vec![0.0; 9];
    pi[0] = 1.0;
    assert!(dirichlet_form(&p, &pi, &[0.0; 9]).is_err());
}

#[test]
fn comparison_of_symmetrized_chain() {
    let r = compare_symmetrized(4, 1, CAP, 200, 3).unwrap();
    assert_eq!(r.states, 240);
    assert_eq!(r.symmetrized_states, 256);
    assert!(r.rho > 0.0 && r.rho <= 1.0);
    assert!(r.sampled_ratio <= r.a_total + 1e-12);
    assert!(r.b_measured <= r.b_bound + 1e-12);
    assert!(r.max_path_len >= 1);
}

#[test]
fn comparison_needs_paths() {
    let p = build_matrix(ChainSpec::LazySrw, 4, CAP).unwrap();
    let q = build_matrix(ChainSpec::Srw, 4, CAP).unwrap();
    let pi = vec![1.0 / 16.0; 16];
    assert!(matches!(
        comparison_constant(&q, &pi, &p, &pi, &PathMap::new()),
        Err(torus_puzzle::Error::MissingPath(_))
    ));
    // Srw = (5/4)(LazySrw - I/5) off the diagonal, so A = 5/4 with unit paths
    let a = comparison_constant(&q, &pi, &p, &pi, &unit_paths(&p)).unwrap();
    assert!((a - 1.25).abs() < 1e-12, "{a}");
}

#[test]
fn breadth_first_paths_are_valid() {
    let p = build_matrix(ChainSpec::LazySrw, 4, CAP).unwrap();
    let paths = bfs_paths(&p, [(0usize, 10usize), (3, 3)]).unwrap();
    let path = &paths[&(0, 10)];
    assert_eq!(path.first(), Some(&0));
    assert_eq!(path.last(), Some(&10));
    assert!(path.windows(2).all(|w| p.p[(w[0], w[1])] > 0.0));
    // torus distance from (0,0) to (2,2) is 4
    assert_eq!(path.len(), 5);
}

#[test]
fn partial_trace_limits() {
    let pt = partial_trace_moment(3, 1, 0, CAP).unwrap();
    assert!((pt.power - 8.0).abs() < 1e-10);
    assert!((pt.spectral - pt.power).abs() < 1e-9);
    for d in [1usize, 2] {
        let late = partial_trace_moment(3, d, 1000, CAP).unwrap();
        assert!((late.power - late.limit).abs() < 1e-9);
        assert!((late.spectral - late.power).abs() < 1e-9);
    }
    let one = partial_trace_moment(3, 1, 1000, CAP).unwrap();
    assert!((one.limit - (1.0 - 1.0 / 9.0)).abs() < 1e-12);
}

#[test]
fn matrix_power_by_squaring() {
    let p = build_matrix(ChainSpec::LazySrw, 3, CAP).unwrap().p;
    let mut naive = nalgebra::DMatrix::<f64>::identity(9, 9);
    for _ in 0..13 {
        naive = &naive * &p;
    }
    assert!((matrix_power(&p, 13) - naive).abs().max() < 1e-14);
}

proptest! {
    #[test]
    fn dirichlet_form_two_ways(f in proptest::collection::vec(-5.0f64..5.0, 72)) {
        let p = build_matrix(ChainSpec::Marginal { d: 1 }, 3, CAP).unwrap();
        let pi = vec![1.0 / 72.0; 72];
        let (inner, edge) = dirichlet_form(&p, &pi, &f).unwrap();
        prop_assert!((inner - edge).abs() < 1e-10 * (1.0 + inner.abs()));
        prop_assert!(edge >= 0.0);
    }
}
