//! The chains of the puzzle: full board, d-piece marginal, symmetrized
//! marginal, product walk, simple random walk and the 3-cycle walk on an
//! alternating group. Each comes as a sampler and, on small instances, as a
//! dense matrix.
//!
//! Matrix states are tuples of cell indices (see [`crate::torus_core`]): tracked
//! pieces in label order, blank last. States are sorted lexicographically,
//! which is the mixed-radix order with radix n^2, so an index depends only on
//! the instance.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{precondition, Error, Result};
use crate::torus_core::{Move, TorusPoint};

pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Label of the piece that starts on `p` in the sorted board: labels run left
/// to right, then top to bottom; the blank starts in the bottom-right corner.
pub fn home_label(p: TorusPoint) -> u32 {
    (p.n - 1 - p.y) * p.n + p.x + 1
}

pub fn home_cell(label: u32, n: u32) -> TorusPoint {
    let row = (label - 1) / n;
    let col = (label - 1) % n;
    TorusPoint { x: col, y: n - 1 - row, n }
}

pub fn start_blank(n: u32) -> TorusPoint {
    TorusPoint { x: n - 1, y: 0, n }
}

/// Full board: `tiles[cell]` is the label on that cell, 0 on the blank.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PuzzleState {
    pub n: u32,
    tiles: Vec<u16>,
    blank: TorusPoint,
}

impl PuzzleState {
    pub fn sorted(n: u32) -> Self {
        let mut tiles = vec![0u16; (n * n) as usize];
        for (i, t) in tiles.iter_mut().enumerate() {
            let p = TorusPoint::from_index(i, n);
            if p != start_blank(n) {
                *t = home_label(p) as u16;
            }
        }
        Self { n, tiles, blank: start_blank(n) }
    }

    pub fn from_tiles(n: u32, tiles: Vec<u16>) -> Result<Self> {
        let size = (n * n) as usize;
        precondition(tiles.len() == size, || "tile vector has the wrong length".into())?;
        let mut seen = vec![false; size];
        for &t in &tiles {
            precondition((t as usize) < size && !seen[t as usize], || "tiles are not a bijection".into())?;
            seen[t as usize] = true;
        }
        let b = tiles.iter().position(|&t| t == 0).unwrap_or(0);
        Ok(Self { n, tiles, blank: TorusPoint::from_index(b, n) })
    }

    pub fn tiles(&self) -> &[u16] {
        &self.tiles
    }

    pub fn blank(&self) -> TorusPoint {
        self.blank
    }

    pub fn label_at(&self, p: TorusPoint) -> u32 {
        self.tiles[p.index()] as u32
    }

    pub fn position_of(&self, label: u32) -> TorusPoint {
        let i = self.tiles.iter().position(|&t| t as u32 == label).expect("label present");
        TorusPoint::from_index(i, self.n)
    }

    pub fn apply(&mut self, m: Move) {
        if m == Move::Hold {
            return;
        }
        let target = self.blank.shift(m);
        self.tiles[self.blank.index()] = self.tiles[target.index()];
        self.tiles[target.index()] = 0;
        self.blank = target;
    }

    pub fn fixed_points(&self) -> usize {
        self.tiles
            .iter()
            .enumerate()
            .filter(|&(i, &t)| t != 0 && home_label(TorusPoint::from_index(i, self.n)) == t as u32)
            .count()
    }

    /// Sign of the permutation of all n^2 cells (blank included) relative to
    /// the sorted board: `true` if odd.
    pub fn cell_permutation_odd(&self) -> bool {
        let size = self.tiles.len();
        let corner = start_blank(self.n);
        let target: Vec<usize> = self
            .tiles
            .iter()
            .map(|&t| if t == 0 { corner.index() } else { home_cell(t as u32, self.n).index() })
            .collect();
        permutation_is_odd(&target[..size])
    }

    /// For even n the permutation parity must equal the parity of the blank's
    /// coordinate sum relative to its start (well defined mod an even n).
    pub fn parity_consistent(&self) -> bool {
        if self.n % 2 == 1 {
            return true;
        }
        let d = self.blank.sub(start_blank(self.n));
        self.cell_permutation_odd() == ((d.x + d.y) % 2 == 1)
    }
}

pub fn permutation_is_odd(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut transpositions = 0usize;
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut c = s;
        while !seen[c] {
            seen[c] = true;
            c = perm[c];
            len += 1;
        }
        transpositions += len - 1;
    }
    transpositions % 2 == 1
}

pub fn puzzle_step<R: Rng + ?Sized>(s: &mut PuzzleState, rng: &mut R) {
    s.apply(Move::from_lazy(rng.random_range(0..5u8)));
}

/// Positions of `d` labelled pieces and the blank, all distinct.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarginalState {
    pub n: u32,
    pub pieces: Vec<TorusPoint>,
    pub blank: TorusPoint,
}

impl MarginalState {
    /// Pieces 1..=d on their home cells, blank in its starting corner.
    pub fn sorted(n: u32, d: usize) -> Self {
        Self { n, pieces: (1..=d as u32).map(|l| home_cell(l, n)).collect(), blank: start_blank(n) }
    }

    pub fn new(n: u32, pieces: Vec<TorusPoint>, blank: TorusPoint) -> Result<Self> {
        let mut all: Vec<TorusPoint> = pieces.clone();
        all.push(blank);
        let distinct: HashSet<_> = all.iter().collect();
        precondition(distinct.len() == all.len(), || "marginal state positions must be distinct".into())?;
        precondition(all.iter().all(|p| p.n == n), || "mixed side lengths".into())?;
        Ok(Self { n, pieces, blank })
    }

    pub fn apply(&mut self, m: Move) {
        if m == Move::Hold {
            return;
        }
        let target = self.blank.shift(m);
        if let Some(p) = self.pieces.iter_mut().find(|p| **p == target) {
            *p = self.blank;
        }
        self.blank = target;
    }

    pub fn transitions(&self) -> Vec<(MarginalState, f64)> {
        let mut out: Vec<(MarginalState, f64)> = Vec::with_capacity(5);
        for m in Move::ALL {
            let mut s = self.clone();
            s.apply(m);
            push_merged(&mut out, s, 0.2);
        }
        out
    }

    pub fn encode(&self) -> Vec<u32> {
        self.pieces.iter().chain(std::iter::once(&self.blank)).map(|p| p.index() as u32).collect()
    }

    pub fn decode(n: u32, code: &[u32]) -> Self {
        let pts: Vec<TorusPoint> = code.iter().map(|&c| TorusPoint::from_index(c as usize, n)).collect();
        let (blank, pieces) = pts.split_last().expect("non-empty code");
        Self { n, pieces: pieces.to_vec(), blank: *blank }
    }
}

pub fn marginal_step<R: Rng + ?Sized>(s: &mut MarginalState, rng: &mut R) {
    s.apply(Move::from_lazy(rng.random_range(0..5u8)));
}

fn push_merged<S: PartialEq>(out: &mut Vec<(S, f64)>, s: S, p: f64) {
    match out.iter_mut().find(|(t, _)| *t == s) {
        Some(e) => e.1 += p,
        None => out.push((s, p)),
    }
}

/// Symmetrized marginal: a piece may share the blank's cell, and at most
/// two pieces may do so at once.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymmetrizedState {
    pub n: u32,
    pub pieces: Vec<TorusPoint>,
    pub blank: TorusPoint,
}

impl SymmetrizedState {
    pub fn new(n: u32, pieces: Vec<TorusPoint>, blank: TorusPoint) -> Result<Self> {
        let s = Self { n, pieces, blank };
        s.validate()?;
        Ok(s)
    }

    pub fn from_marginal(m: &MarginalState) -> Self {
        Self { n: m.n, pieces: m.pieces.clone(), blank: m.blank }
    }

    pub fn validate(&self) -> Result<()> {
        let mut cells: HashMap<TorusPoint, usize> = HashMap::new();
        for p in &self.pieces {
            *cells.entry(*p).or_default() += 1;
        }
        for (c, k) in cells {
            if k > 1 && (c != self.blank || k > 2) {
                return Err(Error::Precondition(format!(
                    "pieces may overlap only pairwise on the blank; {k} pieces share ({}, {})",
                    c.x, c.y
                )));
            }
        }
        Ok(())
    }

    pub fn overlapping(&self) -> Vec<usize> {
        (0..self.pieces.len()).filter(|&i| self.pieces[i] == self.blank).collect()
    }

    fn joint(&self, i: usize, m: Move) -> Self {
        let mut s = self.clone();
        s.blank = s.blank.shift(m);
        s.pieces[i] = s.blank;
        s
    }

    fn solo(&self, m: Move) -> Self {
        let mut s = self.clone();
        s.blank = s.blank.shift(m);
        s
    }

    pub fn transitions(&self) -> Vec<(SymmetrizedState, f64)> {
        let mut out = Vec::with_capacity(9);
        let ov = self.overlapping();
        let hold = match ov.len() {
            0 => {
                for m in Move::DIRECTIONS {
                    push_merged(&mut out, self.solo(m), 0.1);
                }
                0.6
            }
            1 => {
                for m in Move::DIRECTIONS {
                    push_merged(&mut out, self.joint(ov[0], m), 0.1);
                    push_merged(&mut out, self.solo(m), 0.1);
                }
                0.2
            }
            _ => {
                for &i in &ov[..2] {
                    for m in Move::DIRECTIONS {
                        push_merged(&mut out, self.joint(i, m), 0.1);
                    }
                }
                0.2
            }
        };
        push_merged(&mut out, self.clone(), hold);
        out
    }

    pub fn encode(&self) -> Vec<u32> {
        self.pieces.iter().chain(std::iter::once(&self.blank)).map(|p| p.index() as u32).collect()
    }

    pub fn decode(n: u32, code: &[u32]) -> Self {
        let m = MarginalState::decode(n, code);
        Self { n, pieces: m.pieces, blank: m.blank }
    }
}

pub fn symmetrized_step<R: Rng + ?Sized>(s: &mut SymmetrizedState, rng: &mut R) -> Result<()> {
    s.validate()?;
    let u = rng.random_range(0..10u8);
    let ov = s.overlapping();
    let next = match ov.len() {
        0 if u < 4 => Some(s.solo(Move::from_direction(u))),
        1 if u < 4 => Some(s.joint(ov[0], Move::from_direction(u))),
        1 if u < 8 => Some(s.solo(Move::from_direction(u - 4))),
        2.. if u < 4 => Some(s.joint(ov[0], Move::from_direction(u))),
        2.. if u < 8 => Some(s.joint(ov[1], Move::from_direction(u - 4))),
        _ => None,
    };
    if let Some(t) = next {
        *s = t;
    }
    Ok(())
}

/// One step of the product walk: hold with probability 1/2, otherwise each of
/// the first `d` points jumps by an independent uniform offset in
/// `[-M, M]^2` and the last point jumps to a uniform cell.
pub fn product_walk_step<R: Rng + ?Sized>(s: &mut [TorusPoint], range: u32, rng: &mut R) -> Result<()> {
    let n = s.first().map(|p| p.n).unwrap_or(0);
    precondition(2 * range < n, || format!("product walk needs 2M < n (M = {range}, n = {n})"))?;
    if rng.random_bool(0.5) {
        return Ok(());
    }
    let m = range as i64;
    let (last, tracked) = s.split_last_mut().expect("non-empty tuple");
    for p in tracked {
        *p = p.offset(rng.random_range(-m..=m), rng.random_range(-m..=m));
    }
    *last = TorusPoint::new(rng.random_range(0..n) as i64, rng.random_range(0..n) as i64, n);
    Ok(())
}

pub fn product_walk_transitions(s: &[TorusPoint], range: u32) -> Vec<(Vec<TorusPoint>, f64)> {
    let n = s[0].n;
    let d = s.len() - 1;
    let m = range as i64;
    let side = (2 * m + 1) as usize;
    let jumps = side * side;
    let weight = 0.5 / ((jumps.pow(d as u32)) as f64 * (n * n) as f64);
    let mut acc: HashMap<Vec<TorusPoint>, f64> = HashMap::new();
    *acc.entry(s.to_vec()).or_default() += 0.5;
    for code in 0..jumps.pow(d as u32) {
        let mut c = code;
        let mut t = s.to_vec();
        for p in t.iter_mut().take(d) {
            let j = c % jumps;
            c /= jumps;
            *p = p.offset((j % side) as i64 - m, (j / side) as i64 - m);
        }
        for cell in 0..(n * n) as usize {
            t[d] = TorusPoint::from_index(cell, n);
            *acc.entry(t.clone()).or_default() += weight;
        }
    }
    let mut out: Vec<_> = acc.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainSpec {
    /// Non-lazy simple random walk on the torus.
    Srw,
    /// 1/5-lazy simple random walk (the blank's own motion).
    LazySrw,
    /// Full n^2 - 1 puzzle on the states reachable from the sorted board.
    Puzzle,
    Marginal { d: usize },
    Symmetrized { d: usize },
    ProductWalk { d: usize, range: u32 },
}

/// Dense transition matrix with its enumerated states.
#[derive(Clone, Debug)]
pub struct ChainMatrix {
    pub label: String,
    pub states: Vec<Vec<u32>>,
    pub p: DMatrix<f64>,
    index: HashMap<Vec<u32>, usize>,
}

impl ChainMatrix {
    pub fn from_parts(label: impl Into<String>, states: Vec<Vec<u32>>, p: DMatrix<f64>) -> Self {
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self { label: label.into(), states, p, index }
    }

    fn from_transitions(
        label: String,
        mut states: Vec<Vec<u32>>,
        step: impl Fn(&[u32]) -> Vec<(Vec<u32>, f64)>,
    ) -> Result<Self> {
        states.sort();
        let index: HashMap<Vec<u32>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let k = states.len();
        let mut p = DMatrix::<f64>::zeros(k, k);
        for (i, s) in states.iter().enumerate() {
            for (t, w) in step(s) {
                let j = *index
                    .get(&t)
                    .ok_or_else(|| Error::Precondition(format!("transition leaves the state space: {t:?}")))?;
                p[(i, j)] += w;
            }
        }
        Ok(Self { label, states, p, index })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &[u32]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn row_sum_defect(&self) -> f64 {
        self.p.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.p - self.p.transpose()).abs().max()
    }

    /// Eigenvalues in descending order; requires a symmetric matrix.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.0)
    }

    /// Descending eigenvalues and the matching orthonormal eigenvectors.
    pub fn eigen(&self) -> Result<(Vec<f64>, DMatrix<f64>)> {
        precondition(self.symmetry_defect() < 1e-12, || format!("{} is not symmetric", self.label))?;
        let sym = (&self.p + self.p.transpose()) * 0.5;
        Ok(sorted_eigen(sym))
    }

    /// Stationary law from `pi (P - I) = 0`, `sum pi = 1`.
    pub fn stationary(&self) -> Result<DVector<f64>> {
        let k = self.len();
        let mut a = self.p.transpose() - DMatrix::<f64>::identity(k, k);
        for j in 0..k {
            a[(k - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(k);
        b[k - 1] = 1.0;
        a.lu().solve(&b).ok_or_else(|| Error::Singular(format!("stationary law of {}", self.label)))
    }

    /// Whether every state reaches every other (strongly connected support).
    pub fn is_irreducible(&self) -> bool {
        let k = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; k];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for j in 0..k {
                    let w = if forward { self.p[(i, j)] } else { self.p[(j, i)] };
                    if w > 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        k > 0 && reach(true) && reach(false)
    }

    /// Sparse triples `row,col,value` for every nonzero entry, row-major.
    pub fn write_triples<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["row", "col", "value"])?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let v = self.p[(i, j)];
                if v != 0.0 {
                    out.write_record([i.to_string(), j.to_string(), format!("{v:.17e}")])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn falling(n: usize, k: usize) -> usize {
    (0..k).map(|i| n - i).product()
}

fn state_count(spec: ChainSpec, n: u32) -> usize {
    let cells = (n * n) as usize;
    match spec {
        ChainSpec::Srw | ChainSpec::LazySrw => cells,
        ChainSpec::Puzzle => {
            let all = (1..=cells).try_fold(1usize, |a, k| a.checked_mul(k)).unwrap_or(usize::MAX);
            if n % 2 == 0 {
                all / 2
            } else {
                all
            }
        }
        ChainSpec::Marginal { d } => falling(cells, d + 1),
        ChainSpec::Symmetrized { d } => {
            let none = falling(cells, d + 1);
            let one = if d >= 1 { d * cells * falling(cells - 1, d - 1) } else { 0 };
            let two = if d >= 2 { d * (d - 1) / 2 * cells * falling(cells - 1, d - 2) } else { 0 };
            none + one + two
        }
        ChainSpec::ProductWalk { d, .. } => cells.saturating_pow(d as u32 + 1),
    }
}

fn tuples(cells: u32, len: usize, keep: impl Fn(&[u32]) -> bool) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; len];
    loop {
        if keep(&cur) {
            out.push(cur.clone());
        }
        let mut k = len;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < cells {
                break;
            }
            cur[k] = 0;
        }
    }
}

/// Builds the dense matrix of `spec`, refusing instances above `cap` states.
pub fn build_matrix(spec: ChainSpec, n: u32, cap: usize) -> Result<ChainMatrix> {
    precondition(n >= 2, || "side length must be at least 2".into())?;
    let count = state_count(spec, n);
    if count > cap {
        return Err(Error::SizeCap { states: count, cap });
    }
    let cells = n * n;
    let label = format!("{spec:?} n={n}");
    match spec {
        ChainSpec::Srw | ChainSpec::LazySrw => {
            let lazy = spec == ChainSpec::LazySrw;
            let states = (0..cells).map(|c| vec![c]).collect();
            ChainMatrix::from_transitions(label, states, |s| {
                let p = TorusPoint::from_index(s[0] as usize, n);
                let w = if lazy { 0.2 } else { 0.25 };
                let mut out: Vec<(Vec<u32>, f64)> =
                    p.neighbors().iter().map(|q| (vec![q.index() as u32], w)).collect();
                if lazy {
                    out.push((s.to_vec(), 0.2));
                }
                out
            })
        }
        ChainSpec::Puzzle => {
            let start = PuzzleState::sorted(n);
            let mut seen: HashSet<Vec<u16>> = HashSet::from([start.tiles.clone()]);
            let mut queue = VecDeque::from([start]);
            while let Some(s) = queue.pop_front() {
                for m in Move::DIRECTIONS {
                    let mut t = s.clone();
                    t.apply(m);
                    if seen.insert(t.tiles.clone()) {
                        queue.push_back(t);
                    }
                }
            }
            let states = seen.into_iter().map(|t| t.into_iter().map(u32::from).collect()).collect();
            ChainMatrix::from_transitions(label, states, |s| {
                let tiles: Vec<u16> = s.iter().map(|&v| v as u16).collect();
                let b = PuzzleState::from_tiles(n, tiles).expect("enumerated board");
                let mut out = Vec::with_capacity(5);
                for m in Move::ALL {
                    let mut t = b.clone();
                    t.apply(m);
                    push_merged(&mut out, t.tiles.iter().map(|&v| v as u32).collect(), 0.2);
                }
                out
            })
        }
        ChainSpec::Marginal { d } => {
            precondition(d < cells as usize, || "too many tracked pieces".into())?;
            let states = tuples(cells, d + 1, all_distinct);
            ChainMatrix::from_transitions(label, states, |s| {
                MarginalState::decode(n, s).transitions().into_iter().map(|(t, w)| (t.encode(), w)).collect()
            })
        }
        ChainSpec::Symmetrized { d } => {
            precondition(n >= 3, || "symmetrized chain needs n >= 3".into())?;
            let states = tuples(cells, d + 1, |s| SymmetrizedState::decode(n, s).validate().is_ok());
            ChainMatrix::from_transitions(label, states, |s| {
                SymmetrizedState::decode(n, s).transitions().into_iter().map(|(t, w)| (t.encode(), w)).collect()
            })
        }
        ChainSpec::ProductWalk { d, range } => {
            precondition(2 * range < n, || format!("product walk needs 2M < n (M = {range}, n = {n})"))?;
            let states = tuples(cells, d + 1, |_| true);
            ChainMatrix::from_transitions(label, states, |s| {
                let pts: Vec<TorusPoint> = s.iter().map(|&c| TorusPoint::from_index(c as usize, n)).collect();
                product_walk_transitions(&pts, range)
                    .into_iter()
                    .map(|(t, w)| (t.iter().map(|p| p.index() as u32).collect(), w))
                    .collect()
            })
        }
    }
}

fn all_distinct(s: &[u32]) -> bool {
    (0..s.len()).all(|i| (i + 1..s.len()).all(|j| s[i] != s[j]))
}

/// All 3-cycles of `{0..m}` as image vectors.
pub fn three_cycles(m: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for (x, y, z) in [(a, b, c), (a, c, b)] {
                    let mut p: Vec<u32> = (0..m as u32).collect();
                    p[x] = y as u32;
                    p[y] = z as u32;
                    p[z] = x as u32;
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Uniform 3-cycle walk `g -> g c` on the alternating group of degree `m`
/// (permutations stored as image vectors, `(g c)(i) = c(g(i))`).
pub fn three_cycle_walk_matrix(m: usize) -> Result<ChainMatrix> {
    precondition((3..=6).contains(&m), || format!("3-cycle walk supports 3 <= m <= 6, got {m}"))?;
    let mut perms = Vec::new();
    permutations(&mut (0..m as u32).collect::<Vec<_>>(), 0, &mut perms);
    let states: Vec<Vec<u32>> =
        perms.into_iter().filter(|p| !permutation_is_odd(&p.iter().map(|&v| v as usize).collect::<Vec<_>>())).collect();
    let cycles = three_cycles(m);
    let w = 1.0 / cycles.len() as f64;
    ChainMatrix::from_transitions(format!("three-cycle walk on Alt({m})"), states, |g| {
        cycles.iter().map(|c| (g.iter().map(|&i| c[i as usize]).collect(), w)).collect()
    })
}

fn permutations(cur: &mut Vec<u32>, k: usize, out: &mut Vec<Vec<u32>>) {
    if k == cur.len() {
        out.push(cur.clone());
        return;
    }
    for i in k..cur.len() {
        cur.swap(k, i);
        permutations(cur, k + 1, out);
        cur.swap(k, i);
    }
}

/// Largest deviation between the blank-position lumping of the full puzzle
/// and the lazy walk, over every board reachable from the sorted one. Works
/// from the transition rule directly, so no dense matrix is formed.
pub fn blank_lumping_defect(n: u32, cap: usize) -> Result<f64> {
    let count = state_count(ChainSpec::Puzzle, n);
    if count > cap {
        return Err(Error::SizeCap { states: count, cap });
    }
    let start = PuzzleState::sorted(n);
    let mut seen: HashSet<Vec<u16>> = HashSet::from([start.tiles.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut worst = 0.0f64;
    while let Some(s) = queue.pop_front() {
        let mut lumped: HashMap<TorusPoint, f64> = HashMap::new();
        for m in Move::ALL {
            let mut t = s.clone();
            t.apply(m);
            *lumped.entry(t.blank).or_default() += 0.2;
            if m != Move::Hold && seen.insert(t.tiles.clone()) {
                queue.push_back(t);
            }
        }
        for (q, w) in crate::torus_core::srw_one_step_law(s.blank) {
            worst = worst.max((lumped.get(&q).copied().unwrap_or(0.0) - w).abs());
        }
        let srw_mass: f64 = lumped.values().sum();
        worst = worst.max((srw_mass - 1.0).abs());
    }
    Ok(worst)
}
