//! The puzzle as a random walk on `S_{n^2-1} x (Z/nZ)^2`.
//!
//! The board is read from the blank's point of view: translate it so the
//! blank sits in the bottom-right corner `C = (n-1, 0)`, and call the cell a
//! piece then occupies its *relative position*. Relative positions are named
//! by the label that starts there, so a permutation of labels describes an
//! arrangement.
//!
//! `perm[a - 1] = b - 1` means piece `a` sits at the relative position where
//! piece `b` started. A move acts on relative positions the same way whatever
//! the labels are, so generators compose as placements. [`GroupElement::then`]
//! applies `self` first and then `other`; a word is evaluated left to right.
//! This convention is pinned by replaying words on a [`PuzzleState`].

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::chains::{home_cell, home_label, start_blank, ChainMatrix, PuzzleState};
use crate::error::{precondition, Error, Result};
use crate::torus_core::{Move, TorusPoint};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub n: u32,
    pub perm: Vec<u16>,
    pub offset: TorusPoint,
}

impl GroupElement {
    pub fn identity(n: u32) -> Self {
        Self { n, perm: (0..(n * n - 1) as u16).collect(), offset: TorusPoint::origin(n) }
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            n: self.n,
            perm: self.perm.iter().map(|&p| other.perm[p as usize]).collect(),
            offset: self.offset.add(other.offset),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        let mut perm = vec![0u16; self.perm.len()];
        for (a, &b) in self.perm.iter().enumerate() {
            perm[b as usize] = a as u16;
        }
        GroupElement { n: self.n, perm, offset: self.offset.neg() }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(a, &b)| a == b as usize) && self.offset == TorusPoint::origin(self.n)
    }

    /// Reads the arrangement of a board relative to its blank.
    pub fn from_board(s: &PuzzleState) -> GroupElement {
        let n = s.n;
        let corner = start_blank(n);
        let blank = s.blank();
        let mut perm = vec![0u16; (n * n - 1) as usize];
        for (cell, &label) in s.tiles().iter().enumerate() {
            if label == 0 {
                continue;
            }
            let rel = TorusPoint::from_index(cell, n).sub(blank).add(corner);
            perm[label as usize - 1] = (home_label(rel) - 1) as u16;
        }
        GroupElement { n, perm, offset: blank.sub(corner) }
    }

    /// Lengths of the nontrivial cycles of the permutation, descending.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = vec![false; self.perm.len()];
        let mut lens = Vec::new();
        for s in 0..self.perm.len() {
            if seen[s] {
                continue;
            }
            let mut len = 0;
            let mut c = s;
            while !seen[c] {
                seen[c] = true;
                c = self.perm[c] as usize;
                len += 1;
            }
            if len > 1 {
                lens.push(len);
            }
        }
        lens.sort_unstable_by(|a, b| b.cmp(a));
        lens
    }

    /// Labels moved by the permutation, ascending.
    pub fn support(&self) -> Vec<u32> {
        self.perm.iter().enumerate().filter(|(a, &b)| *a != b as usize).map(|(a, _)| a as u32 + 1).collect()
    }

    pub fn is_odd(&self) -> bool {
        let perm: Vec<usize> = self.perm.iter().map(|&v| v as usize).collect();
        crate::chains::permutation_is_odd(&perm)
    }
}

/// Where a move sends each relative cell (indexed like torus cells). The
/// corner itself is the blank and maps to itself.
pub fn relative_action(m: Move, n: u32) -> Vec<u32> {
    let corner = start_blank(n);
    let (dx, dy) = m.delta();
    (0..(n * n) as usize)
        .map(|i| {
            let r = TorusPoint::from_index(i, n);
            let img = if m == Move::Hold || r == corner {
                r
            } else if r == corner.offset(dx, dy) {
                corner.offset(-dx, -dy)
            } else {
                r.offset(-dx, -dy)
            };
            img.index() as u32
        })
        .collect()
}

pub fn generator(m: Move, n: u32) -> GroupElement {
    let act = relative_action(m, n);
    let perm = (1..n * n)
        .map(|a| {
            let r = home_cell(a, n);
            let img = TorusPoint::from_index(act[r.index()] as usize, n);
            (home_label(img) - 1) as u16
        })
        .collect();
    let (dx, dy) = m.delta();
    GroupElement { n, perm, offset: TorusPoint::new(dx, dy, n) }
}

/// A word over `R, L, U, D` and the identity `.`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GeneratorWord {
    pub letters: Vec<Move>,
}

impl GeneratorWord {
    pub fn inverse(&self) -> GeneratorWord {
        GeneratorWord { letters: self.letters.iter().rev().map(|m| m.inverse()).collect() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for GeneratorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.letters {
            write!(f, "{}", m.letter())?;
        }
        Ok(())
    }
}

impl FromStr for GeneratorWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Move::from_letter(c).ok_or_else(|| Error::Precondition(format!("bad generator letter {c:?}"))))
            .collect::<Result<_>>()?;
        Ok(Self { letters })
    }
}

pub fn evaluate_word(w: &GeneratorWord, n: u32) -> GroupElement {
    let gens: Vec<GroupElement> = Move::ALL.iter().map(|&m| generator(m, n)).collect();
    w.letters.iter().fold(GroupElement::identity(n), |acc, m| {
        let g = &gens[Move::ALL.iter().position(|x| x == m).expect("known move")];
        acc.then(g)
    })
}

pub const COMMUTATOR_WORD: &str = "URDL";

/// `U R D L`: cycles three pieces around a 2x2 block and returns the blank.
pub fn commutator_three_cycle(n: u32) -> Result<GroupElement> {
    precondition(n >= 3, || format!("commutator needs n >= 3, got {n}"))?;
    let c = evaluate_word(&COMMUTATOR_WORD.parse()?, n);
    if c.cycle_type() != [3] || c.offset != TorusPoint::origin(n) {
        return Err(Error::Precondition(format!(
            "URDL gave cycle type {:?} and offset ({}, {}): generator convention is broken",
            c.cycle_type(),
            c.offset.x,
            c.offset.y
        )));
    }
    Ok(c)
}

/// Measured bound on routing words: `|w| <= ROUTE_LENGTH_CONSTANT * n` for
/// every triple at n = 4 and for sampled triples at n = 6 and 8.
pub const ROUTE_LENGTH_CONSTANT: f64 = 4.0;

/// Deterministic router moving any three pieces of the sorted board onto the
/// support of the commutator.
///
/// It runs one backward breadth-first search over the relative positions of
/// three pieces, which are all the commutator cares about. Routing then walks
/// downhill, taking the first of `R, L, U, D` that lowers the distance. The
/// resulting words are shortest possible.
#[derive(Clone, Debug)]
pub struct Router {
    pub n: u32,
    dist: Vec<u16>,
    actions: Vec<Vec<u32>>,
    commutator: GroupElement,
}

const UNREACHED: u16 = u16::MAX;

impl Router {
    pub fn new(n: u32) -> Result<Self> {
        precondition(n >= 4, || format!("router needs n >= 4, got {n}"))?;
        precondition(n <= 12, || format!("router table grows as n^6; n = {n} is too large"))?;
        let commutator = commutator_three_cycle(n)?;
        let cells = (n * n) as usize;
        let actions: Vec<Vec<u32>> = Move::DIRECTIONS.iter().map(|&m| relative_action(m, n)).collect();
        let mut dist = vec![UNREACHED; cells * cells * cells];
        let sup: Vec<usize> = commutator.support().iter().map(|&a| home_cell(a, n).index()).collect();
        let mut queue = VecDeque::new();
        for &(i, j, k) in &[(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
            let key = (sup[i] * cells + sup[j]) * cells + sup[k];
            dist[key] = 0;
            queue.push_back(key);
        }
        while let Some(key) = queue.pop_front() {
            let (a, b, c) = (key / (cells * cells), (key / cells) % cells, key % cells);
            for act in &actions {
                let next = (act[a] as usize * cells + act[b] as usize) * cells + act[c] as usize;
                if dist[next] == UNREACHED {
                    dist[next] = dist[key] + 1;
                    queue.push_back(next);
                }
            }
        }
        Ok(Self { n, dist, actions, commutator })
    }

    pub fn commutator(&self) -> &GroupElement {
        &self.commutator
    }

    /// Word carrying the pieces `targets` from their home cells onto the
    /// commutator's support.
    pub fn route_word(&self, targets: [u32; 3]) -> Result<GeneratorWord> {
        let n = self.n;
        let ok = targets.iter().all(|&t| (1..n * n).contains(&t))
            && targets[0] != targets[1]
            && targets[1] != targets[2]
            && targets[0] != targets[2];
        precondition(ok, || format!("route targets must be 3 distinct labels in 1..{}, got {targets:?}", n * n - 1))?;
        let cells = (n * n) as usize;
        let mut pos = targets.map(|t| home_cell(t, n).index());
        let key = |p: &[usize; 3]| (p[0] * cells + p[1]) * cells + p[2];
        let mut letters = Vec::new();
        let mut d = self.dist[key(&pos)];
        if d == UNREACHED {
            return Err(Error::Precondition(format!("targets {targets:?} cannot be routed")));
        }
        while d > 0 {
            let (m, next) = Move::DIRECTIONS
                .iter()
                .zip(&self.actions)
                .map(|(&m, act)| (m, pos.map(|p| act[p] as usize)))
                .find(|(_, q)| self.dist[key(q)] + 1 == d)
                .expect("breadth-first distances decrease along some move");
            letters.push(m);
            pos = next;
            d -= 1;
        }
        Ok(GeneratorWord { letters })
    }

    /// `w`, then the commutator, then `w^-1`: a 3-cycle on the routed pieces.
    pub fn conjugated_commutator(&self, w: &GeneratorWord) -> GroupElement {
        let g = evaluate_word(w, self.n);
        g.then(&self.commutator).then(&g.inverse())
    }
}

/// Quotient of the walk driven by `S = {R c, L c, U c, D c, c}`, `c` a
/// uniform 3-cycle. It tracks the blank offset and the relative positions
/// of the first `tracked` labels; an element (`g` then `c`) moves the offset
/// by `g` and the tracked positions by `g`'s action followed by `c`.
///
/// The matrix commutes with translations of the offset, so its spectrum is
/// the union over characters `xi` of `(Z/nZ)^2` of the Hermitian blocks
/// `B_xi = (1/5) sum_g e(xi . delta_g / n) A_g K`, where `A_g` moves the
/// tracked positions and `K` is the 3-cycle kernel on tracked tuples.
#[derive(Clone, Debug)]
pub struct SWalkQuotient {
    pub n: u32,
    pub tracked: usize,
    tuples: Vec<Vec<u32>>,
    kernel: DMatrix<f64>,
    moves: Vec<(Move, Vec<usize>)>,
}

impl SWalkQuotient {
    pub fn new(n: u32, tracked: usize, cap: usize) -> Result<Self> {
        precondition(n >= 3, || format!("S-walk quotient needs n >= 3, got {n}"))?;
        precondition(tracked <= 3, || "at most 3 tracked labels".into())?;
        let cells = n * n;
        let corner = start_blank(n).index() as u32;
        let positions: Vec<u32> = (0..cells).filter(|&c| c != corner).collect();
        let count = (0..tracked).map(|i| positions.len() - i).product::<usize>();
        if count > cap {
            return Err(Error::SizeCap { states: count, cap });
        }
        let mut tuples: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..tracked {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    positions
                        .iter()
                        .filter(|p| !t.contains(p))
                        .map(|&p| {
                            let mut u = t.clone();
                            u.push(p);
                            u
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        tuples.sort();
        let index = |t: &[u32]| tuples.binary_search_by(|u| u.as_slice().cmp(t)).expect("tuple enumerated");
        let k = tuples.len();
        let total = positions.len() * (positions.len() - 1) * (positions.len() - 2) / 3;
        let mut kernel = DMatrix::<f64>::zeros(k, k);
        for (i, t) in tuples.iter().enumerate() {
            let mut touched = 0usize;
            for_each_touching_cycle(&positions, t, |c| {
                touched += 1;
                let img: Vec<u32> = t.iter().map(|p| c(*p)).collect();
                kernel[(i, index(&img))] += 1.0 / total as f64;
            });
            kernel[(i, i)] += (total - touched) as f64 / total as f64;
        }
        let moves = Move::ALL
            .iter()
            .map(|&m| {
                let act = relative_action(m, n);
                let map = tuples.iter().map(|t| index(&t.iter().map(|&p| act[p as usize]).collect::<Vec<_>>())).collect();
                (m, map)
            })
            .collect();
        Ok(Self { n, tracked, tuples, kernel, moves })
    }

    pub fn tuple_count(&self) -> usize {
        self.tuples.len()
    }

    /// Dense matrix over `(offset cell, tuple index)`, offset-major.
    pub fn matrix(&self, cap: usize) -> Result<ChainMatrix> {
        let cells = (self.n * self.n) as usize;
        let k = self.tuples.len();
        let size = cells * k;
        if size > cap {
            return Err(Error::SizeCap { states: size, cap });
        }
        let mut p = DMatrix::<f64>::zeros(size, size);
        for v in 0..cells {
            let vp = TorusPoint::from_index(v, self.n);
            for (m, map) in &self.moves {
                let v2 = vp.shift(*m).index();
                for t in 0..k {
                    let mid = map[t];
                    for t2 in 0..k {
                        let w = self.kernel[(mid, t2)];
                        if w != 0.0 {
                            p[(v * k + t, v2 * k + t2)] += 0.2 * w;
                        }
                    }
                }
            }
        }
        let states = (0..size).map(|i| vec![(i / k) as u32, (i % k) as u32]).collect();
        Ok(ChainMatrix::from_parts(format!("S-walk quotient n={} tracked={}", self.n, self.tracked), states, p))
    }

    /// Full spectrum, descending, from the character blocks.
    pub fn spectrum(&self) -> Vec<f64> {
        let n = self.n;
        let k = self.tuples.len();
        let mut all = Vec::with_capacity((n * n) as usize * k);
        for a in 0..n {
            for b in 0..n {
                let mut block = DMatrix::<Complex64>::zeros(k, k);
                for (m, map) in &self.moves {
                    let (dx, dy) = m.delta();
                    let phase = 2.0 * std::f64::consts::PI * (a as f64 * dx as f64 + b as f64 * dy as f64) / n as f64;
                    let w = Complex64::from_polar(0.2, phase);
                    for t in 0..k {
                        let mid = map[t];
                        for t2 in 0..k {
                            let kv = self.kernel[(mid, t2)];
                            if kv != 0.0 {
                                block[(t, t2)] += w * kv;
                            }
                        }
                    }
                }
                let herm = (&block + block.adjoint()) * Complex64::new(0.5, 0.0);
                all.extend(SymmetricEigen::new(herm).eigenvalues.iter().copied());
            }
        }
        all.sort_by(|x, y| y.total_cmp(x));
        all
    }

    /// `1 - lambda_2` of the quotient walk.
    pub fn gap(&self) -> f64 {
        let s = self.spectrum();
        1.0 - s[1]
    }
}

/// Calls `f` with each 3-cycle (as a position map) that moves some element of
/// `t`, each exactly once.
fn for_each_touching_cycle(positions: &[u32], t: &[u32], mut f: impl FnMut(&dyn Fn(u32) -> u32)) {
    let m = positions.len();
    for i in 0..m {
        for j in i + 1..m {
            for l in j + 1..m {
                let (a, b, c) = (positions[i], positions[j], positions[l]);
                if !t.iter().any(|&x| x == a || x == b || x == c) {
                    continue;
                }
                f(&|x| if x == a { b } else if x == b { c } else if x == c { a } else { x });
                f(&|x| if x == a { c } else if x == c { b } else if x == b { a } else { x });
            }
        }
    }
}
