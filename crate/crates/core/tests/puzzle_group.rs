use nalgebra::DMatrix;
use proptest::prelude::*;
use torus_puzzle::chains::PuzzleState;
use torus_puzzle::puzzle_group::*;
use torus_puzzle::torus_core::{Move, TorusPoint};

fn word(s: &str) -> GeneratorWord {
    s.parse().unwrap()
}

#[test]
fn generator_cycle_types() {
    for n in 3..=7u32 {
        let mut want = vec![n as usize; n as usize - 1];
        want.push(n as usize - 1);
        for m in Move::DIRECTIONS {
            let g = generator(m, n);
            assert_eq!(g.cycle_type(), want, "n={n} {m:?}");
            // (n-1)^2 + (n-2) transpositions: odd for every n
            assert!(g.is_odd());
        }
    }
}

#[test]
fn opposite_generators_cancel() {
    for n in [3u32, 4, 5] {
        assert!(evaluate_word(&word("RL"), n).is_identity());
        assert!(evaluate_word(&word("UD"), n).is_identity());
    }
}

#[test]
fn commutator_is_a_three_cycle_fixing_the_blank() {
    for n in 3..=6 {
        let c = commutator_three_cycle(n).unwrap();
        assert_eq!(c.cycle_type(), vec![3]);
        assert_eq!(c.offset, TorusPoint::origin(n));
        assert_eq!(c.support().len(), 3);
        assert!(!c.is_odd());
    }
}

#[test]
fn router_reaches_every_triple_at_four() {
    let r = Router::new(4).unwrap();
    let mut longest = 0;
    for a in 1..16u32 {
        for b in a + 1..16 {
            for c in b + 1..16 {
                let w = r.route_word([a, b, c]).unwrap();
                longest = longest.max(w.len());
                let g = r.conjugated_commutator(&w);
                assert_eq!(g.support(), vec![a, b, c]);
                assert_eq!(g.cycle_type(), vec![3]);
                assert_eq!(g.offset, TorusPoint::origin(4));
            }
        }
    }
    assert!(longest as f64 <= ROUTE_LENGTH_CONSTANT * 4.0, "longest word {longest}");
}

#[test]
fn router_rejects_bad_targets() {
    let r = Router::new(4).unwrap();
    assert!(r.route_word([1, 1, 2]).is_err());
    assert!(r.route_word([0, 1, 2]).is_err());
    assert!(r.route_word([1, 2, 16]).is_err());
    assert!(Router::new(3).is_err());
}

#[test]
fn words_parse_and_print() {
    let w = word("URDL");
    assert_eq!(w.to_string(), "URDL");
    assert_eq!(w.inverse().to_string(), "RULD");
    assert!("URX".parse::<GeneratorWord>().is_err());
}

#[test]
fn s_walk_blocks_match_dense_symmetrization() {
    let q = SWalkQuotient::new(3, 1, 10_000).unwrap();
    assert_eq!(q.tuple_count(), 8);
    let p = q.matrix(10_000).unwrap();
    assert!(p.row_sum_defect() < 1e-12);
    let sym: DMatrix<f64> = (&p.p + p.p.transpose()) * 0.5;
    let mut dense: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    dense.sort_by(|a, b| b.total_cmp(a));
    let blocks = q.spectrum();
    assert_eq!(dense.len(), blocks.len());
    for (a, b) in dense.iter().zip(&blocks) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn s_walk_has_a_gap() {
    let q = SWalkQuotient::new(4, 1, 10_000).unwrap();
    let gap = q.gap();
    assert!(gap > 0.0 && gap < 1.0, "{gap}");
}

fn letters() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('R'), Just('L'), Just('U'), Just('D')], 0..60)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn board_and_group_agree(w in letters(), n in 3u32..7) {
        let word = word(&w);
        let mut s = PuzzleState::sorted(n);
        for &m in &word.letters {
            s.apply(m);
        }
        prop_assert_eq!(GroupElement::from_board(&s), evaluate_word(&word, n));
    }

    #[test]
    fn inverses_cancel(w in letters(), n in 3u32..6) {
        let g = evaluate_word(&word(&w), n);
        prop_assert!(g.then(&g.inverse()).is_identity());
        prop_assert!(evaluate_word(&word(&w).inverse(), n).then(&g).is_identity());
    }

    #[test]
    fn parity_is_word_length_parity(w in letters(), n in 3u32..7) {
        prop_assert_eq!(evaluate_word(&word(&w), n).is_odd(), w.len() % 2 == 1);
    }
}
