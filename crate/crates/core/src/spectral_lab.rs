//! Resolvent and spectral numerics: the killed walk `P'` behind hitting-time
//! transforms, d2 distances, the product-walk spectrum, Dirichlet forms and
//! path comparison between chains.
//!
//! `P'` is the 1/5-lazy walk with the origin's row and column removed. Its
//! basis is lexicographic cell order minus the origin, so cell `c = x n + y`
//! sits at index `c - 1`.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chains::{
    build_matrix, home_cell, start_blank, ChainMatrix, ChainSpec, MarginalState, SymmetrizedState,
};
use crate::error::{precondition, Error, Result};
use crate::parallel::fold_trials;
use crate::renewal_lab::Estimate;
use crate::rng::{trial_rng, MoveSource};
use crate::torus_core::{dirichlet_kernel, Move, TorusPoint};

const TAU: f64 = std::f64::consts::TAU;

pub struct ResolventModel {
    pub n: u32,
    pub p_prime: DMatrix<f64>,
}

impl ResolventModel {
    pub fn new(n: u32) -> Result<Self> {
        precondition((3..=40).contains(&n), || format!("dense resolvent needs 3 <= n <= 40, got {n}"))?;
        let k = (n * n - 1) as usize;
        let mut p = DMatrix::zeros(k, k);
        for i in 0..k {
            let here = TorusPoint::from_index(i + 1, n);
            p[(i, i)] = 0.2;
            for q in here.neighbors() {
                if q.index() != 0 {
                    p[(i, q.index() - 1)] += 0.2;
                }
            }
        }
        Ok(Self { n, p_prime: p })
    }

    pub fn dim(&self) -> usize {
        self.p_prime.nrows()
    }

    pub fn index_of(&self, dx: i64, dy: i64) -> Option<usize> {
        TorusPoint::new(dx, dy, self.n).index().checked_sub(1)
    }

    fn unit(&self, dx: i64, dy: i64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[self.index_of(dx, dy).expect("not the origin")] = 1.0;
        v
    }

    /// Indicator of the four neighbours of the origin.
    pub fn neighbor_sum(&self) -> DVector<f64> {
        [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().map(|&(x, y)| self.unit(x, y)).fold(DVector::zeros(self.dim()), |a, b| a + b)
    }

    fn shifted(&self, z: Complex64) -> DMatrix<Complex64> {
        let k = self.dim();
        DMatrix::from_fn(k, k, |i, j| {
            let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            id - z * self.p_prime[(i, j)]
        })
    }

    /// `R(z) rhs = (I - z P')^{-1} rhs`.
    pub fn resolvent_apply(&self, z: Complex64, rhs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        self.shifted(z).lu().solve(rhs).ok_or_else(|| Error::Singular(format!("I - zP' at z = {z}")))
    }

    fn real_resolvent_apply(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.dim();
        (DMatrix::identity(k, k) - &self.p_prime)
            .lu()
            .solve(rhs)
            .ok_or_else(|| Error::Singular("I - P'".into()))
    }
}

fn complexify(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

/// `E[z^T]` for the hitting time `T` of the origin from (1,0).
pub fn hitting_char_at(model: &ResolventModel, z: Complex64) -> Result<Complex64> {
    let r = model.resolvent_apply(z, &complexify(&model.neighbor_sum()))?;
    Ok(z / 5.0 * r[model.index_of(1, 0).unwrap()])
}

/// The transform at the frequency `xi`, `z = e^{2 pi i xi}`.
pub fn hitting_char_fun(model: &ResolventModel, xi: f64) -> Result<Complex64> {
    hitting_char_at(model, Complex64::from_polar(1.0, TAU * xi))
}

/// `chi'(1) = 1 + (1/5) e^t R(1) P' R(1) b` from `R'(1) = R(1) P' R(1)`.
pub fn expected_hitting_time(model: &ResolventModel) -> Result<f64> {
    let rb = model.real_resolvent_apply(&model.neighbor_sum())?;
    let rprb = model.real_resolvent_apply(&(&model.p_prime * rb))?;
    Ok(1.0 + rprb[model.index_of(1, 0).unwrap()] / 5.0)
}

/// `chi'(1)` by the complex step `Im chi(1 + ih) / h`.
pub fn expected_hitting_time_complex_step(model: &ResolventModel) -> Result<f64> {
    let h = 1e-8;
    Ok(hitting_char_at(model, Complex64::new(1.0, h))?.im / h)
}

/// Monte-Carlo lazy hitting time of the origin from (1,0).
pub fn mc_hitting_time(n: u32, trials: u64, seed: u64) -> Result<Estimate> {
    precondition(n >= 3, || format!("hitting simulation needs n >= 3, got {n}"))?;
    precondition(trials >= 2, || "need at least two trials".into())?;
    Ok(moment_estimate(trials, |i| {
        let mut src = MoveSource::new(trial_rng(seed, i));
        walk_until_origin(&mut src, n, 1, 0)
    }))
}

/// Monte-Carlo return time to the origin, counted from time zero to the first
/// visit after the walk has left (the initial holds are included).
pub fn mc_return_time(n: u32, trials: u64, seed: u64) -> Result<Estimate> {
    precondition(n >= 3, || format!("return simulation needs n >= 3, got {n}"))?;
    precondition(trials >= 2, || "need at least two trials".into())?;
    Ok(moment_estimate(trials, |i| {
        let mut src = MoveSource::new(trial_rng(seed, i));
        let mut steps = 1u64;
        let mut mv = src.lazy();
        while mv == 0 {
            steps += 1;
            mv = src.lazy();
        }
        let (dx, dy) = Move::from_lazy(mv).delta();
        steps + walk_until_origin(&mut src, n, dx, dy)
    }))
}

fn walk_until_origin<R: rand::RngCore>(src: &mut MoveSource<R>, n: u32, x0: i64, y0: i64) -> u64 {
    let m = n as i32;
    let (mut x, mut y) = ((x0 as i32).rem_euclid(m), (y0 as i32).rem_euclid(m));
    let mut steps = 0u64;
    loop {
        steps += 1;
        match src.lazy() {
            0 => {}
            1 => x = if x + 1 == m { 0 } else { x + 1 },
            2 => x = if x == 0 { m - 1 } else { x - 1 },
            3 => y = if y + 1 == m { 0 } else { y + 1 },
            _ => y = if y == 0 { m - 1 } else { y - 1 },
        }
        if x == 0 && y == 0 {
            return steps;
        }
    }
}

fn moment_estimate(trials: u64, sample: impl Fn(u64) -> u64 + Sync) -> Estimate {
    let (s1, s2) = fold_trials(
        trials,
        || (0f64, 0f64),
        |acc, i| {
            let v = sample(i) as f64;
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    );
    let t = trials as f64;
    let mean = s1 / t;
    let var = (s2 - t * mean * mean) / (t - 1.0);
    Estimate { value: mean, se: (var.max(0.0) / t).sqrt() }
}

/// Eigenvalues of `P'` (descending) with overlaps `c_i = <v_i, e_(1,0)>`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub overlaps: Vec<f64>,
}

impl SpectrumSummary {
    pub fn of(model: &ResolventModel) -> Self {
        let (vals, vecs) = crate::chains::sorted_eigen(model.p_prime.clone());
        let row = model.index_of(1, 0).unwrap();
        let overlaps = (0..vals.len()).map(|i| vecs[(row, i)]).collect();
        Self { eigenvalues: vals, overlaps }
    }

    /// CSV with columns `index, eigenvalue, overlap`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "eigenvalue", "overlap"])?;
        for (i, (l, c)) in self.eigenvalues.iter().zip(&self.overlaps).enumerate() {
            out.write_record([(i + 1).to_string(), format!("{l:.17e}"), format!("{c:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct EigenSums {
    pub s1: f64,
    pub s2: f64,
    pub overlap_mass: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

pub fn eigen_sums(summary: &SpectrumSummary) -> EigenSums {
    let pairs = summary.eigenvalues.iter().zip(&summary.overlaps);
    EigenSums {
        s1: pairs.clone().map(|(l, c)| c * c / (1.0 - l)).sum(),
        s2: pairs.clone().map(|(l, c)| c * c / (1.0 - l).powi(2)).sum(),
        overlap_mass: summary.overlaps.iter().map(|c| c * c).sum(),
        lambda_max: summary.eigenvalues[0],
        lambda_min: *summary.eigenvalues.last().unwrap(),
    }
}

fn joint_parts(
    model: &ResolventModel,
    xi1: i64,
    xi2: f64,
) -> (Complex64, DVector<Complex64>, DMatrix<Complex64>, DVector<Complex64>) {
    let n = model.n;
    let z1 = Complex64::from_polar(1.0, TAU * xi1 as f64 / n as f64);
    let z2 = Complex64::from_polar(1.0, TAU * xi2);
    let k = model.dim();
    let (right, left) = (model.index_of(1, 0).unwrap(), model.index_of(-1, 0).unwrap());
    let mut w = DVector::from_element(k, Complex64::new(0.0, 0.0));
    w[left] = z1 * z2 / 2.0;
    w[right] = z2 / (2.0 * z1);
    let mut m = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
    m[(right, left)] = z1 * z2 / 5.0;
    m[(left, right)] = z2 / (5.0 * z1);
    let mut v = DVector::from_element(k, Complex64::new(0.0, 0.0));
    v[model.index_of(0, 1).unwrap()] = Complex64::new(0.2, 0.0);
    v[model.index_of(0, -1).unwrap()] = Complex64::new(0.2, 0.0);
    (z2, w, m, v)
}

/// `E[e(xi1 H_1 / n + xi2 r_1)]` as `w^t (I - z2 P' - M)^{-1} v`.
pub fn joint_char_fun(model: &ResolventModel, xi1: i64, xi2: f64) -> Result<Complex64> {
    precondition(model.n <= 24, || format!("joint transform needs n <= 24, got {}", model.n))?;
    let (z2, w, m, v) = joint_parts(model, xi1, xi2);
    let a = model.shifted(z2) - m;
    let x = a.lu().solve(&v).ok_or_else(|| Error::Singular(format!("joint transform at ({xi1}, {xi2})")))?;
    Ok(w.dot(&x))
}

/// The same transform evaluated literally as `w^t (I - R M)^{-1} R v`.
pub fn joint_char_fun_literal(model: &ResolventModel, xi1: i64, xi2: f64) -> Result<Complex64> {
    precondition(model.n <= 24, || format!("joint transform needs n <= 24, got {}", model.n))?;
    let (z2, w, m, v) = joint_parts(model, xi1, xi2);
    let lu = model.shifted(z2).lu();
    let r = lu.try_inverse().ok_or_else(|| Error::Singular("R(z2)".into()))?;
    let k = model.dim();
    let inner = DMatrix::identity(k, k) - &r * m;
    let x = inner.lu().solve(&(&r * v)).ok_or_else(|| Error::Singular("I - R M".into()))?;
    Ok(w.dot(&x))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct JointBound {
    /// Largest `c` with `|chi| <= 1 - c max(xi1^2/n^2, xi2^2)` on the grid.
    pub c_fit: f64,
    pub max_modulus: f64,
    pub points: usize,
}

/// Fits the modulus bound over `xi1` in `(-n/2, n/2]` and `xi2` on `xi2_grid`.
pub fn joint_char_bound(model: &ResolventModel, xi2_grid: &[f64]) -> Result<JointBound> {
    let n = model.n as i64;
    let mut c_fit = f64::INFINITY;
    let mut max_modulus = 0f64;
    let mut points = 0;
    for xi1 in (-(n - 1) / 2)..=(n / 2) {
        for &xi2 in xi2_grid {
            if xi1 == 0 && xi2 == 0.0 {
                continue;
            }
            let chi = joint_char_fun(model, xi1, xi2)?.norm();
            let scale = ((xi1 as f64 / n as f64).powi(2)).max(xi2 * xi2);
            c_fit = c_fit.min((1.0 - chi) / scale);
            max_modulus = max_modulus.max(chi);
            points += 1;
        }
    }
    Ok(JointBound { c_fit, max_modulus, points })
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct D2Check {
    pub steps: u32,
    /// `|X| sum_x (P^N(y, x) - 1/|X|)^2` from the given start `y`.
    pub lhs: f64,
    /// `sum_{i >= 1} lambda_i^{2N}`.
    pub rhs: f64,
    /// The left side averaged over all starts.
    pub lhs_average: f64,
    pub tv: f64,
}

/// Both sides of the d2 identity for a symmetric chain started at `start`.
pub fn d2_identity_check(chain: &ChainMatrix, start: usize, steps: u32) -> Result<D2Check> {
    precondition(start < chain.len(), || format!("start index {start} outside {} states", chain.len()))?;
    let eig = chain.eigenvalues()?;
    let k = chain.len();
    let u = 1.0 / k as f64;
    let mut mu = DVector::zeros(k);
    mu[start] = 1.0;
    let pt = chain.p.transpose();
    for _ in 0..steps {
        mu = &pt * mu;
    }
    let lhs = k as f64 * mu.iter().map(|m| (m - u).powi(2)).sum::<f64>();
    let tv = 0.5 * mu.iter().map(|m| (m - u).abs()).sum::<f64>();
    let power = matrix_power(&chain.p, steps);
    let lhs_average = power.iter().map(|m| (m - u).powi(2)).sum::<f64>();
    let rhs = eig.iter().skip(1).map(|l| l.powi(2 * steps as i32)).sum();
    Ok(D2Check { steps, lhs, rhs, lhs_average, tv })
}

pub fn matrix_power(p: &DMatrix<f64>, mut e: u32) -> DMatrix<f64> {
    let k = p.nrows();
    let mut out = DMatrix::identity(k, k);
    let mut base = p.clone();
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

/// Closed-form spectrum of the product walk: for every character
/// `a in ((Z/n)^2)^(d+1)`, `1/2 + (1/2) [a_{d+1} = 0] prod_j D_M(a_j1/n) D_M(a_j2/n)`.
/// Sorted descending.
pub fn pdm_spectrum(n: u32, d: usize, range: u32, cap: usize) -> Result<Vec<f64>> {
    precondition(2 * range < n, || format!("product walk needs 2M < n (M = {range}, n = {n})"))?;
    let cells = (n * n) as usize;
    let count = cells.checked_pow(d as u32 + 1).unwrap_or(usize::MAX);
    if count > cap {
        return Err(Error::SizeCap { states: count, cap });
    }
    // per-coordinate factor tables
    let cell_factor: Vec<f64> = (0..cells)
        .map(|c| {
            let p = TorusPoint::from_index(c, n);
            dirichlet_kernel(range, p.x as f64 / n as f64) * dirichlet_kernel(range, p.y as f64 / n as f64)
        })
        .collect();
    let tracked = cells.pow(d as u32);
    let mut products = vec![1.0f64; tracked];
    for (code, prod) in products.iter_mut().enumerate() {
        let mut c = code;
        for _ in 0..d {
            *prod *= cell_factor[c % cells];
            c /= cells;
        }
    }
    let mut out = Vec::with_capacity(count);
    out.extend(products.iter().map(|p| 0.5 + 0.5 * p));
    out.extend(std::iter::repeat_n(0.5, count - tracked));
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// `sum_{lambda != 1} lambda^{c (n/M)^2}`, dropping one copy of eigenvalue 1.
pub fn pdm_spectral_sum(spectrum: &[f64], n: u32, range: u32, c: f64) -> f64 {
    let power = c * (n as f64 / range as f64).powi(2);
    spectrum.iter().skip(1).map(|l| l.abs().powf(power)).sum()
}

/// `E(f, f)` two ways: `<(I - P) f, f>_pi` and the edge sum
/// `(1/2) sum (f(x) - f(y))^2 pi(x) P(x, y)`. Rejects non-reversible input.
pub fn dirichlet_form(p: &ChainMatrix, pi: &[f64], f: &[f64]) -> Result<(f64, f64)> {
    let k = p.len();
    precondition(pi.len() == k && f.len() == k, || "vector lengths must match the state count".into())?;
    let mut defect = 0f64;
    for i in 0..k {
        for j in 0..k {
            defect = defect.max((pi[i] * p.p[(i, j)] - pi[j] * p.p[(j, i)]).abs());
        }
    }
    precondition(defect < 1e-12, || format!("{} is not reversible for the given measure", p.label))?;
    let fv = DVector::from_column_slice(f);
    let pf = &p.p * &fv;
    let inner: f64 = (0..k).map(|i| pi[i] * f[i] * (f[i] - pf[i])).sum();
    let mut edges = 0f64;
    for i in 0..k {
        for j in 0..k {
            let w = p.p[(i, j)];
            if w != 0.0 {
                edges += (f[i] - f[j]).powi(2) * pi[i] * w;
            }
        }
    }
    Ok((inner, 0.5 * edges))
}

/// Paths in `P` (state sequences, both ends included) for edges of `P~`.
pub type PathMap = HashMap<(usize, usize), Vec<usize>>;

/// Path-comparison constant `A` with `E~ <= A E`, for chains on one state set.
pub fn comparison_constant(
    p_tilde: &ChainMatrix,
    pi_tilde: &[f64],
    p: &ChainMatrix,
    pi: &[f64],
    paths: &PathMap,
) -> Result<f64> {
    let k = p.len();
    precondition(p_tilde.len() == k, || "comparison needs a shared state space".into())?;
    let mut load: HashMap<(usize, usize), f64> = HashMap::new();
    for x in 0..k {
        for y in 0..k {
            let w = p_tilde.p[(x, y)];
            if x == y || w == 0.0 {
                continue;
            }
            let path = paths.get(&(x, y)).ok_or_else(|| Error::MissingPath(format!("({x}, {y})")))?;
            precondition(path.first() == Some(&x) && path.last() == Some(&y), || {
                format!("path for ({x}, {y}) has the wrong endpoints")
            })?;
            let len = (path.len() - 1) as f64;
            for e in path.windows(2) {
                if p.p[(e[0], e[1])] <= 0.0 {
                    return Err(Error::MissingPath(format!("({x}, {y}) uses non-edge ({}, {})", e[0], e[1])));
                }
                *load.entry((e[0], e[1])).or_default() += len * pi_tilde[x] * w;
            }
        }
    }
    Ok(load.into_iter().map(|((z, w), l)| l / (pi[z] * p.p[(z, w)])).fold(0.0, f64::max))
}

/// Length-one paths for every off-diagonal edge of `p`.
pub fn unit_paths(p: &ChainMatrix) -> PathMap {
    let k = p.len();
    let mut out = PathMap::new();
    for x in 0..k {
        for y in 0..k {
            if x != y && p.p[(x, y)] != 0.0 {
                out.insert((x, y), vec![x, y]);
            }
        }
    }
    out
}

/// Shortest paths in the transition graph of `p` for the requested pairs.
pub fn bfs_paths(p: &ChainMatrix, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<PathMap> {
    let k = p.len();
    let adj: Vec<Vec<usize>> =
        (0..k).map(|i| (0..k).filter(|&j| j != i && p.p[(i, j)] > 0.0).collect()).collect();
    let mut by_source: HashMap<usize, Vec<usize>> = HashMap::new();
    for (x, y) in pairs {
        by_source.entry(x).or_default().push(y);
    }
    let mut out = PathMap::new();
    for (x, targets) in by_source {
        let mut parent = vec![usize::MAX; k];
        parent[x] = x;
        let mut queue = VecDeque::from([x]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if parent[j] == usize::MAX {
                    parent[j] = i;
                    queue.push_back(j);
                }
            }
        }
        for y in targets {
            if parent[y] == usize::MAX {
                return Err(Error::MissingPath(format!("({x}, {y}) is disconnected")));
            }
            let mut path = vec![y];
            while *path.last().unwrap() != x {
                path.push(parent[*path.last().unwrap()]);
            }
            path.reverse();
            out.insert((x, y), path);
        }
    }
    Ok(out)
}

/// Comparison of the symmetrized chain (extended functions) with the marginal.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ComparisonReport {
    pub n: u32,
    pub d: usize,
    pub states: usize,
    pub symmetrized_states: usize,
    /// Row-mass normalizer of the dominating kernel.
    pub rho: f64,
    /// `A` with `E'_{d,s}(f, f) <= A E_d(f, f)`.
    pub a_total: f64,
    pub max_path_len: usize,
    /// Largest sampled `E'_{d,s}(f, f) / E_d(f, f)`.
    pub sampled_ratio: f64,
    pub samples: usize,
    /// `max_i (1 - lambda_{i,s}) / (1 - lambda_i)` over `i >= 1`.
    pub b_measured: f64,
    /// `A |X_{d,s}| / |X_d|`, the bound implied for it.
    pub b_bound: f64,
}

/// Convex weights expressing an extended value through marginal states:
/// overlapping pieces are moved to a neighbouring free cell and averaged.
fn extension_weights(s: &SymmetrizedState, marginal: &ChainMatrix, out: &mut HashMap<usize, f64>, weight: f64) {
    let ov = s.overlapping();
    if ov.is_empty() {
        let idx = marginal.index_of(&s.encode()).expect("non-overlapping state is marginal");
        *out.entry(idx).or_default() += weight;
        return;
    }
    let mut options = Vec::new();
    for &i in ov.iter().take(2) {
        for q in s.blank.neighbors() {
            if s.pieces.iter().any(|p| *p == q) {
                continue;
            }
            let mut t = s.clone();
            t.pieces[i] = q;
            options.push(t);
        }
    }
    let share = weight / options.len() as f64;
    for t in options {
        extension_weights(&t, marginal, out, share);
    }
}

pub fn compare_symmetrized(n: u32, d: usize, cap: usize, samples: usize, seed: u64) -> Result<ComparisonReport> {
    precondition(n >= 3 && d >= 1, || format!("comparison needs n >= 3, d >= 1 (n = {n}, d = {d})"))?;
    let pd = build_matrix(ChainSpec::Marginal { d }, n, cap)?;
    let ps = build_matrix(ChainSpec::Symmetrized { d }, n, cap)?;
    let (kd, ks) = (pd.len(), ps.len());
    // extension E: R^{X_d} -> R^{X_{d,s}}, sparse rows
    let ext: Vec<Vec<(usize, f64)>> = ps
        .states
        .iter()
        .map(|code| {
            let mut w = HashMap::new();
            extension_weights(&SymmetrizedState::decode(n, code), &pd, &mut w, 1.0);
            let mut row: Vec<_> = w.into_iter().collect();
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    // dominating kernel by Jensen on each extended difference
    let pi_s = 1.0 / ks as f64;
    let mut kernel = DMatrix::<f64>::zeros(kd, kd);
    for x in 0..ks {
        for z in 0..ks {
            let w = ps.p[(x, z)];
            if x == z || w == 0.0 {
                continue;
            }
            for &(y, cy) in &ext[x] {
                for &(v, cv) in &ext[z] {
                    if y != v {
                        kernel[(y, v)] += pi_s * w * cy * cv;
                    }
                }
            }
        }
    }
    let pi_d = 1.0 / kd as f64;
    let rho = (0..kd).map(|y| kernel.row(y).sum() / pi_d).fold(0.0, f64::max);
    let mut p_tilde = &kernel / (rho * pi_d);
    for y in 0..kd {
        let off: f64 = p_tilde.row(y).sum();
        p_tilde[(y, y)] = 1.0 - off;
    }
    let p_tilde = ChainMatrix::from_parts("dominating kernel", pd.states.clone(), p_tilde);
    let pairs: Vec<(usize, usize)> =
        (0..kd).flat_map(|y| (0..kd).filter(move |&v| v != y).map(move |v| (y, v))).filter(|&(y, v)| kernel[(y, v)] > 0.0).collect();
    let paths = bfs_paths(&pd, pairs)?;
    let max_path_len = paths.values().map(|p| p.len() - 1).max().unwrap_or(0);
    let uniform = vec![pi_d; kd];
    let a_total = rho * comparison_constant(&p_tilde, &uniform, &pd, &uniform, &paths)?;

    let uniform_s = vec![pi_s; ks];
    let mut rng = trial_rng(seed, 0);
    let mut sampled_ratio = 0f64;
    for _ in 0..samples {
        let f: Vec<f64> = (0..kd).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ef: Vec<f64> = ext.iter().map(|row| row.iter().map(|&(y, c)| c * f[y]).sum()).collect();
        let (e_s, _) = dirichlet_form(&ps, &uniform_s, &ef)?;
        let (e_d, _) = dirichlet_form(&pd, &uniform, &f)?;
        sampled_ratio = sampled_ratio.max(e_s / e_d);
    }

    let ld = pd.eigenvalues()?;
    let ls = ps.eigenvalues()?;
    let b_measured = (1..kd).map(|i| (1.0 - ls[i]) / (1.0 - ld[i])).fold(0.0, f64::max);
    Ok(ComparisonReport {
        n,
        d,
        states: kd,
        symmetrized_states: ks,
        rho,
        a_total,
        max_path_len,
        sampled_ratio,
        samples,
        b_measured,
        b_bound: a_total * ks as f64 / kd as f64,
    })
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PartialTrace {
    pub n: u32,
    pub d: usize,
    pub steps: u32,
    /// `E[binom(F, d)]` from the eigendecomposition.
    pub spectral: f64,
    /// The same from an explicit matrix power.
    pub power: f64,
    /// The `N -> infinity` value `(1/d!)(1 - d/n^2)`.
    pub limit: f64,
}

/// Exact `E[binom(F_N, d)]` for the puzzle from the sorted board: the sum over
/// d-sets of labels of the probability that all of them are home after N steps.
pub fn partial_trace_moment(n: u32, d: usize, steps: u32, cap: usize) -> Result<PartialTrace> {
    precondition(d >= 1, || "partial trace needs d >= 1".into())?;
    let chain = build_matrix(ChainSpec::Marginal { d }, n, cap)?;
    let (vals, vecs) = chain.eigen()?;
    let power = matrix_power(&chain.p, steps);
    let weights: Vec<f64> = vals.iter().map(|l| l.powi(steps as i32)).collect();
    let cells = n * n;
    let blank = start_blank(n);
    let (mut spectral, mut direct) = (0f64, 0f64);
    for labels in subsets(cells - 1, d) {
        let homes: Vec<TorusPoint> = labels.iter().map(|&l| home_cell(l, n)).collect();
        let start = MarginalState::new(n, homes.clone(), blank)?;
        let a = chain.index_of(&start.encode()).expect("start state enumerated");
        for b in 0..cells {
            let b = TorusPoint::from_index(b as usize, n);
            if homes.contains(&b) {
                continue;
            }
            let end = MarginalState { n, pieces: homes.clone(), blank: b };
            let c = chain.index_of(&end.encode()).expect("end state enumerated");
            spectral += (0..vals.len()).map(|k| weights[k] * vecs[(a, k)] * vecs[(c, k)]).sum::<f64>();
            direct += power[(a, c)];
        }
    }
    let factorial: f64 = (1..=d).map(|k| k as f64).product();
    let limit = (1.0 - d as f64 / cells as f64) / factorial;
    Ok(PartialTrace { n, d, steps, spectral, power: direct, limit })
}

/// Increasing `d`-subsets of `{1..=m}`.
fn subsets(m: u32, d: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur: Vec<u32> = (1..=d as u32).collect();
    if d as u32 > m {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < m - (d - 1 - i) as u32 {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..d {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
