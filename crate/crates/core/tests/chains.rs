use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torus_puzzle::chains::*;
use torus_puzzle::torus_core::{Move, TorusPoint};

const CAP: usize = DEFAULT_STATE_CAP;

#[test]
fn sorted_board_layout() {
    let s = PuzzleState::sorted(4);
    assert_eq!(s.blank(), TorusPoint::new(3, 0, 4));
    assert_eq!(s.label_at(TorusPoint::new(0, 3, 4)), 1);
    assert_eq!(s.label_at(TorusPoint::new(3, 3, 4)), 4);
    assert_eq!(s.label_at(TorusPoint::new(0, 0, 4)), 13);
    assert_eq!(s.fixed_points(), 15);
    for label in 1..16 {
        assert_eq!(home_label(home_cell(label, 4)), label);
    }
}

#[test]
fn a_move_carries_the_neighbor_opposite() {
    let mut s = PuzzleState::sorted(4);
    let before = s.label_at(TorusPoint::new(0, 0, 4));
    s.apply(Move::Right);
    assert_eq!(s.blank(), TorusPoint::new(0, 0, 4));
    assert_eq!(s.label_at(TorusPoint::new(3, 0, 4)), before);
    assert_eq!(s.fixed_points(), 14);
}

#[test]
fn from_tiles_validates() {
    assert!(PuzzleState::from_tiles(3, vec![0; 9]).is_err());
    let s = PuzzleState::sorted(3);
    assert_eq!(PuzzleState::from_tiles(3, s.tiles().to_vec()).unwrap(), s);
}

#[test]
fn lazy_walk_spectrum_is_cosine_table() {
    let n = 5u32;
    let chain = build_matrix(ChainSpec::LazySrw, n, CAP).unwrap();
    let got = chain.eigenvalues().unwrap();
    let mut want: Vec<f64> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| {
            let (u, v) = (2.0 * PI * a as f64 / n as f64, 2.0 * PI * b as f64 / n as f64);
            (1.0 + 2.0 * u.cos() + 2.0 * v.cos()) / 5.0
        })
        .collect();
    want.sort_by(|a, b| b.total_cmp(a));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn marginal_chains_are_doubly_stochastic_and_irreducible() {
    for (d, states) in [(1usize, 72usize), (2, 504)] {
        let chain = build_matrix(ChainSpec::Marginal { d }, 3, CAP).unwrap();
        assert_eq!(chain.len(), states);
        assert!(chain.row_sum_defect() < 1e-12);
        assert!(chain.symmetry_defect() < 1e-12);
        assert!(chain.is_irreducible());
        let pi = chain.stationary().unwrap();
        assert!(pi.iter().all(|p| (p - 1.0 / states as f64).abs() < 1e-10));
    }
}

#[test]
fn symmetrized_chain_counts_overlaps() {
    // one piece may sit anywhere, blank anywhere: n^2 * n^2 states
    let chain = build_matrix(ChainSpec::Symmetrized { d: 1 }, 3, CAP).unwrap();
    assert_eq!(chain.len(), 81);
    assert!(chain.row_sum_defect() < 1e-12);
    assert!(chain.symmetry_defect() < 1e-12);
}

#[test]
fn symmetrized_state_rejects_triple_overlap() {
    let n = 4;
    let p = TorusPoint::new(1, 1, n);
    assert!(SymmetrizedState::new(n, vec![p, p], p).is_ok());
    assert!(SymmetrizedState::new(n, vec![p, p, p], p).is_err());
}

#[test]
fn size_cap_is_enforced() {
    assert!(matches!(
        build_matrix(ChainSpec::Marginal { d: 3 }, 5, 1000),
        Err(torus_puzzle::Error::SizeCap { .. })
    ));
}

#[test]
fn three_cycle_walk_spectrum_from_characters() {
    // Alt(4): trivial rep, two 1-d reps averaging to -1/2, and the 3-d rep
    // with character 0 on 3-cycles (multiplicity 9).
    let eig = three_cycle_walk_matrix(4).unwrap().eigenvalues().unwrap();
    assert_eq!(eig.len(), 12);
    assert!((eig[0] - 1.0).abs() < 1e-12);
    for e in &eig[1..10] {
        assert!(e.abs() < 1e-12);
    }
    for e in &eig[10..] {
        assert!((e + 0.5).abs() < 1e-12);
    }
    assert_eq!(three_cycles(5).len(), 20);
}

#[test]
fn blank_position_lumps_to_lazy_walk() {
    assert!(blank_lumping_defect(3, 400_000).unwrap() < 1e-12);
}

#[test]
fn product_walk_rows_sum_to_one() {
    let n = 5;
    let s = vec![TorusPoint::new(0, 0, n), TorusPoint::new(2, 3, n)];
    let t = product_walk_transitions(&s, 1);
    assert!((t.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
    let mut u = s.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(product_walk_step(&mut u, 3, &mut rng).is_err());
}

#[test]
fn permutation_parity() {
    assert!(!permutation_is_odd(&[0, 1, 2]));
    assert!(permutation_is_odd(&[1, 0, 2]));
    assert!(!permutation_is_odd(&[1, 2, 0]));
}

#[test]
fn triples_writer_lists_nonzero_entries() {
    let chain = build_matrix(ChainSpec::LazySrw, 3, CAP).unwrap();
    let mut buf = Vec::new();
    chain.write_triples(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    // 9 states, each with hold + 4 neighbors
    assert_eq!(text.lines().count(), 1 + 9 * 5);
}

proptest! {
    #[test]
    fn random_play_keeps_parity_and_blank_lumping(seed in any::<u64>(), steps in 1usize..400, n in 3u32..7) {
        let mut s = PuzzleState::sorted(n);
        let mut m = MarginalState::sorted(n, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..steps {
            let mv = Move::from_lazy(rand::Rng::random_range(&mut rng, 0..5u8));
            s.apply(mv);
            m.apply(mv);
            prop_assert!(s.parity_consistent());
        }
        prop_assert_eq!(s.blank(), m.blank);
        for (i, p) in m.pieces.iter().enumerate() {
            prop_assert_eq!(s.position_of(i as u32 + 1), *p);
        }
    }

    #[test]
    fn move_then_inverse_restores(seed in any::<u64>(), n in 3u32..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = PuzzleState::sorted(n);
        for _ in 0..50 {
            puzzle_step(&mut s, &mut rng);
        }
        let before = s.clone();
        for m in Move::ALL {
            let mut t = s.clone();
            t.apply(m);
            t.apply(m.inverse());
            prop_assert_eq!(&t, &before);
        }
    }

    #[test]
    fn marginal_codes_round_trip(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = MarginalState::sorted(5, d);
        for _ in 0..30 {
            marginal_step(&mut s, &mut rng);
        }
        prop_assert_eq!(MarginalState::decode(5, &s.encode()), s.clone());
        let total: f64 = s.transitions().iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetrized_steps_stay_valid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = SymmetrizedState::from_marginal(&MarginalState::sorted(4, 2));
        for _ in 0..200 {
            symmetrized_step(&mut s, &mut rng).unwrap();
            prop_assert!(s.validate().is_ok());
        }
    }
}
