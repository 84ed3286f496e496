use std::f64::consts::PI;

use proptest::prelude::*;
use torus_puzzle::torus_core::*;

/// Fourier series for the torus potential kernel, summed directly.
fn fourier_potential(n: u32, x: i64, y: i64) -> f64 {
    let nf = n as f64;
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a == 0 && b == 0 {
                continue;
            }
            let (u, v) = (2.0 * PI * a as f64 / nf, 2.0 * PI * b as f64 / nf);
            let phi = 0.5 * (u.cos() + v.cos());
            s += (1.0 - (u * x as f64 + v * y as f64).cos()) / (1.0 - phi);
        }
    }
    s / (nf * nf)
}

#[test]
fn potential_kernel_matches_fourier_sum() {
    for n in [4u32, 7, 10] {
        let g = PotentialTable::new(n).unwrap();
        for x in 0..n as i64 {
            for y in 0..n as i64 {
                let want = fourier_potential(n, x, y);
                assert!((g.get(x, y) - want).abs() < 1e-9, "n={n} ({x},{y}): {} vs {want}", g.get(x, y));
            }
        }
    }
}

#[test]
fn potential_kernel_approaches_planar_values() {
    let g = PotentialTable::new(64).unwrap();
    assert!((g.get(1, 0) - (1.0 - 1.0 / 4096.0)).abs() < 1e-10);
    assert!((g.get(1, 1) - 4.0 / PI).abs() < 2e-3);
    assert!((g.get(2, 0) - (4.0 - 8.0 / PI)).abs() < 2e-3);
}

#[test]
fn return_probabilities_near_planar_limit() {
    let lim = ReturnProbabilities::planar_limit();
    assert!((lim.total() - 1.0).abs() < 1e-15);
    let p = return_probabilities(&PotentialTable::new(64).unwrap());
    assert!((p.same - 0.5).abs() < 0.005);
    assert!((p.opposite - 0.13662).abs() < 0.005);
    assert!((p.vertical - 0.18169).abs() < 0.005);
    assert!((p.total() - 1.0).abs() < 1e-12);
}

#[test]
fn first_return_frequencies_match_green_at_small_n() {
    let n = 8;
    let g = return_probabilities(&PotentialTable::new(n).unwrap());
    let trials = 40_000;
    let c = first_return_counts(n, trials, 9).unwrap();
    assert_eq!(c.iter().sum::<u64>(), trials);
    let tf = trials as f64;
    for (count, p) in [(c[0] as f64, g.same), (c[1] as f64, g.opposite), (c[2] as f64, 2.0 * g.vertical)] {
        let se = (p * (1.0 - p) / tf).sqrt();
        assert!((count / tf - p).abs() < 4.0 * se, "{} vs {p}", count / tf);
    }
}

#[test]
fn potential_table_rejects_tiny_torus() {
    assert!(PotentialTable::new(2).is_err());
}

#[test]
fn one_step_law_is_lazy_uniform() {
    let p = TorusPoint::new(0, 0, 5);
    let law = srw_one_step_law(p);
    assert_eq!(law.len(), 5);
    assert!(law.iter().all(|&(_, w)| (w - 0.2).abs() < 1e-15));
    assert!(law.iter().any(|&(q, _)| q == p));
    // on a 2-torus opposite neighbours coincide
    let law = srw_one_step_law(TorusPoint::new(0, 0, 2));
    assert_eq!(law.len(), 3);
    assert!((law.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-15);
}

/// Direct Fourier sum with a generous fixed cutoff.
fn theta_fourier(t: f64, x: f64, y: f64) -> f64 {
    let one = |x: f64| {
        (-60i32..=60).map(|k| (-2.0 * PI * PI * t * (k * k) as f64).exp() * (2.0 * PI * k as f64 * x).cos()).sum::<f64>()
    };
    one(x) * one(y)
}

/// Gaussian images, which converge fast for small t.
fn theta_images(t: f64, x: f64, y: f64) -> f64 {
    let one = |x: f64| {
        (-30i32..=30).map(|m| (-(x - m as f64).powi(2) / (2.0 * t)).exp()).sum::<f64>() / (2.0 * PI * t).sqrt()
    };
    one(x) * one(y)
}

#[test]
fn theta_matches_both_series() {
    for &(t, x, y) in &[(0.1, 0.0, 0.0), (0.3, 0.25, 0.4), (0.02, 0.1, 0.9), (0.005, 0.0, 0.5), (1.0, 0.5, 0.5)] {
        let got = theta(t, x, y).unwrap();
        let a = theta_images(t, x, y);
        assert!((got - a).abs() < 1e-10 * a.max(1.0), "t={t}: {got} vs {a}");
        if t >= 0.02 {
            let b = theta_fourier(t, x, y);
            assert!((got - b).abs() < 1e-10 * b.max(1.0));
        }
    }
}

#[test]
fn theta_at_origin_for_fixed_point_mean() {
    let v = theta(0.1, 0.0, 0.0).unwrap();
    assert!((v - 1.634733571994).abs() < 1e-10, "{v}");
}

#[test]
fn theta_grid_law_is_a_distribution() {
    let law = ThetaEvaluator::new(0.05).unwrap().grid_law(12);
    assert_eq!(law.len(), 144);
    assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(law.iter().all(|&p| p > 0.0));
    // symmetric under x -> -x
    assert!((law[1 * 12] - law[11 * 12]).abs() < 1e-14);
}

#[test]
fn theta_rejects_nonpositive_time() {
    assert!(ThetaEvaluator::new(0.0).is_err());
    assert!(ThetaEvaluator::new(-1.0).is_err());
}

fn dirichlet_cosine_sum(big_n: u32, x: f64) -> f64 {
    let s: f64 = (1..=big_n).map(|j| (2.0 * PI * j as f64 * x).cos()).sum();
    (1.0 + 2.0 * s) / (2 * big_n + 1) as f64
}

#[test]
fn dirichlet_gap_constant_is_capped() {
    assert_eq!(dirichlet_gap_constant(10.0), 0.5);
    assert!((dirichlet_gap_constant(0.1) - DIRICHLET_QUADRATIC_C * 0.01).abs() < 1e-15);
}

proptest! {
    #[test]
    fn dirichlet_kernel_is_a_cosine_average(big_n in 1u32..20, x in -1.0f64..1.0) {
        prop_assert!((dirichlet_kernel(big_n, x) - dirichlet_cosine_sum(big_n, x)).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_quadratic_bound(big_n in 1u32..30, frac in 0.0f64..1.0) {
        let x = frac / (2.0 * big_n as f64);
        let nf = big_n as f64;
        prop_assert!(dirichlet_kernel(big_n, x).abs() <= 1.0 - DIRICHLET_QUADRATIC_C * nf * nf * x * x + 1e-12);
    }

    #[test]
    fn torus_arithmetic_round_trips(n in 3u32..40, x in -100i64..100, y in -100i64..100, a in -100i64..100, b in -100i64..100) {
        let p = TorusPoint::new(x, y, n);
        let q = TorusPoint::new(a, b, n);
        prop_assert_eq!(p.add(q).sub(q), p);
        prop_assert_eq!(p.add(p.neg()), TorusPoint::origin(n));
        prop_assert_eq!(TorusPoint::from_index(p.index(), n), p);
        let (sx, sy) = p.signed();
        prop_assert!(2 * sx.abs() <= n as i64 && 2 * sy.abs() <= n as i64);
        prop_assert_eq!(TorusPoint::new(sx, sy, n), p);
    }

    #[test]
    fn moves_invert(v in 0u8..5, n in 3u32..20, x in 0i64..20, y in 0i64..20) {
        let m = Move::from_lazy(v);
        let p = TorusPoint::new(x, y, n);
        prop_assert_eq!(p.shift(m).shift(m.inverse()), p);
        prop_assert_eq!(Move::from_letter(m.letter()), Some(m));
    }

    #[test]
    fn signed_residue_is_centered(v in -1000i64..1000, n in 3u32..50) {
        let r = signed_residue(v, n);
        prop_assert!(2 * r.abs() <= n as i64);
        prop_assert_eq!((v - r).rem_euclid(n as i64), 0);
    }
}
