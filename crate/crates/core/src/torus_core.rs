//! Geometry and special functions on the discrete torus (Z/nZ)^2.
//!
//! Coordinates: `x` grows to the right, `y` grows upward, and a move `Right`
//! carries the blank to `x + 1`. Cells are indexed `x * n + y` (lexicographic
//! in `(x, y)`), and that index is used by every matrix in the crate.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;

use crate::error::{precondition, Error, Result};
use crate::parallel::fold_trials;
use crate::rng::{trial_rng, MoveSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Hold,
    Right,
    Left,
    Up,
    Down,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Hold, Move::Right, Move::Left, Move::Up, Move::Down];
    pub const DIRECTIONS: [Move; 4] = [Move::Right, Move::Left, Move::Up, Move::Down];

    /// Maps a uniform symbol of `0..5` to a move (0 is the hold).
    #[inline(always)]
    pub fn from_lazy(v: u8) -> Move {
        Move::ALL[v as usize]
    }

    #[inline(always)]
    pub fn from_direction(v: u8) -> Move {
        Move::DIRECTIONS[v as usize]
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Hold => (0, 0),
            Move::Right => (1, 0),
            Move::Left => (-1, 0),
            Move::Up => (0, 1),
            Move::Down => (0, -1),
        }
    }

    pub fn inverse(self) -> Move {
        match self {
            Move::Hold => Move::Hold,
            Move::Right => Move::Left,
            Move::Left => Move::Right,
            Move::Up => Move::Down,
            Move::Down => Move::Up,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Move::Right | Move::Left)
    }

    pub fn letter(self) -> char {
        match self {
            Move::Hold => '.',
            Move::Right => 'R',
            Move::Left => 'L',
            Move::Up => 'U',
            Move::Down => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<Move> {
        Some(match c {
            '.' => Move::Hold,
            'R' => Move::Right,
            'L' => Move::Left,
            'U' => Move::Up,
            'D' => Move::Down,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusPoint {
    pub x: u32,
    pub y: u32,
    pub n: u32,
}

impl TorusPoint {
    pub fn new(x: i64, y: i64, n: u32) -> Self {
        let m = n as i64;
        Self { x: x.rem_euclid(m) as u32, y: y.rem_euclid(m) as u32, n }
    }

    pub fn origin(n: u32) -> Self {
        Self { x: 0, y: 0, n }
    }

    pub fn from_index(i: usize, n: u32) -> Self {
        Self { x: (i / n as usize) as u32, y: (i % n as usize) as u32, n }
    }

    pub fn index(self) -> usize {
        self.x as usize * self.n as usize + self.y as usize
    }

    pub fn offset(self, dx: i64, dy: i64) -> Self {
        Self::new(self.x as i64 + dx, self.y as i64 + dy, self.n)
    }

    pub fn shift(self, m: Move) -> Self {
        let (dx, dy) = m.delta();
        self.offset(dx, dy)
    }

    pub fn add(self, o: TorusPoint) -> Self {
        self.offset(o.x as i64, o.y as i64)
    }

    pub fn sub(self, o: TorusPoint) -> Self {
        self.offset(-(o.x as i64), -(o.y as i64))
    }

    pub fn neg(self) -> Self {
        Self::new(-(self.x as i64), -(self.y as i64), self.n)
    }

    /// The four wrapped neighbours in the order R, L, U, D. For n = 2 the
    /// right and left (and up and down) neighbours coincide.
    pub fn neighbors(self) -> [TorusPoint; 4] {
        Move::DIRECTIONS.map(|m| self.shift(m))
    }

    /// Representative of each coordinate in `(-n/2, n/2]`.
    pub fn signed(self) -> (i64, i64) {
        (signed_residue(self.x as i64, self.n), signed_residue(self.y as i64, self.n))
    }

    pub fn linf(self, o: TorusPoint) -> i64 {
        let (dx, dy) = o.sub(self).signed();
        dx.abs().max(dy.abs())
    }
}

pub fn signed_residue(v: i64, n: u32) -> i64 {
    let m = n as i64;
    let r = v.rem_euclid(m);
    if 2 * r > m {
        r - m
    } else {
        r
    }
}

/// One step of the 1/5-lazy simple random walk.
pub fn srw_step<R: Rng + ?Sized>(p: TorusPoint, rng: &mut R) -> TorusPoint {
    p.shift(Move::from_lazy(rng.random_range(0..5u8)))
}

/// Exact one-step law of [`srw_step`], merged over coinciding targets.
pub fn srw_one_step_law(p: TorusPoint) -> Vec<(TorusPoint, f64)> {
    let mut law: Vec<(TorusPoint, f64)> = Vec::with_capacity(5);
    for m in Move::ALL {
        let q = p.shift(m);
        match law.iter_mut().find(|(r, _)| *r == q) {
            Some(e) => e.1 += 0.2,
            None => law.push((q, 0.2)),
        }
    }
    law
}

/// Potential kernel of simple random walk on the torus.
///
/// `G` solves `(I - P) G = 1/n^2 - delta_0` with `G(0) = 0`, where `P` is the
/// non-lazy walk. Laziness and a global scale leave every return-probability
/// ratio unchanged. With this normalization `G(1,0) = 1 - 1/n^2`, and for
/// n -> infinity, `G(1,1) -> 4/pi` and `G(2,0) -> 4 - 8/pi` (the classical
/// planar potential kernel).
#[derive(Clone, Debug)]
pub struct PotentialTable {
    pub n: u32,
    values: Vec<f64>,
}

impl PotentialTable {
    /// Solves the singular Laplacian system by conjugate gradients on the
    /// mean-zero subspace, where the operator is positive definite.
    pub fn new(n: u32) -> Result<Self> {
        precondition(n >= 3, || format!("potential table needs n >= 3, got {n}"))?;
        let size = (n * n) as usize;
        let lap = |v: &[f64], out: &mut [f64]| {
            for i in 0..size {
                let p = TorusPoint::from_index(i, n);
                let s: f64 = p.neighbors().iter().map(|q| v[q.index()]).sum();
                out[i] = v[i] - 0.25 * s;
            }
        };
        let mut b = vec![1.0 / size as f64; size];
        b[0] -= 1.0;
        let mut x = vec![0.0; size];
        let mut r = b.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; size];
        let b_norm = dot(&b, &b).sqrt();
        let mut rr = dot(&r, &r);
        let max_iter = 50 * size.max(100);
        let mut converged = false;
        for _ in 0..max_iter {
            lap(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Singular(format!(
                    "Laplacian lost definiteness on the mean-zero subspace (n = {n})"
                )));
            }
            let alpha = rr / pap;
            for i in 0..size {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= 1e-14 * b_norm {
                converged = true;
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..size {
                p[i] = r[i] + beta * p[i];
            }
        }
        if !converged {
            return Err(Error::NotConverged(format!("potential kernel CG at n = {n}")));
        }
        let x0 = x[0];
        for v in &mut x {
            *v -= x0;
        }
        x[0] = 0.0;
        Ok(Self { n, values: x })
    }

    pub fn get(&self, dx: i64, dy: i64) -> f64 {
        self.values[TorusPoint::new(dx, dy, self.n).index()]
    }

    pub fn at(&self, p: TorusPoint) -> f64 {
        self.values[p.index()]
    }

    /// CSV with columns `x, y, G`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "G"])?;
        for (i, g) in self.values.iter().enumerate() {
            let p = TorusPoint::from_index(i, self.n);
            out.write_record([p.x.to_string(), p.y.to_string(), format!("{g:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direction of first entry to the origin for a walk started at (1,0).
///
/// `same` is entry from (1,0), `opposite` from (-1,0), and `vertical` is the
/// probability of each of (0,1) and (0,-1).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ReturnProbabilities {
    pub same: f64,
    pub opposite: f64,
    pub vertical: f64,
}

impl ReturnProbabilities {
    pub fn total(&self) -> f64 {
        self.same + self.opposite + 2.0 * self.vertical
    }

    /// n -> infinity values: 1/2, 2/pi - 1/2 and 1/2 - 1/pi.
    pub fn planar_limit() -> Self {
        Self { same: 0.5, opposite: 2.0 / PI - 0.5, vertical: 0.5 - 1.0 / PI }
    }
}

pub fn return_probabilities(table: &PotentialTable) -> ReturnProbabilities {
    let g10 = table.get(1, 0);
    let g11 = table.get(1, 1);
    let g20 = table.get(2, 0);
    let den = 8.0 * g10 - 2.0 * g11 - g20;
    ReturnProbabilities {
        same: 2.0 * g10 / den,
        opposite: (2.0 * g10 - g20) / den,
        vertical: (2.0 * g10 - g11) / den,
    }
}

/// Monte-Carlo first-entry directions: counts `[same, opposite, vertical]`
/// (vertical pools both (0,1) and (0,-1)). Holds never change the entry
/// direction, so only moves are simulated.
pub fn first_return_counts(n: u32, trials: u64, seed: u64) -> Result<[u64; 3]> {
    precondition(n >= 3, || format!("first-return experiment needs n >= 3, got {n}"))?;
    let m = n as i32;
    Ok(fold_trials(
        trials,
        || [0u64; 3],
        |acc, i| {
            let mut src = MoveSource::new(trial_rng(seed, i));
            let (mut x, mut y) = (1i32, 0i32);
            loop {
                let d = src.direction();
                let (px, py) = (x, y);
                match d {
                    0 => x = if x + 1 == m { 0 } else { x + 1 },
                    1 => x = if x == 0 { m - 1 } else { x - 1 },
                    2 => y = if y + 1 == m { 0 } else { y + 1 },
                    _ => y = if y == 0 { m - 1 } else { y - 1 },
                }
                if x == 0 && y == 0 {
                    let slot = match (px, py) {
                        (1, 0) => 0,
                        (_, 0) => 1,
                        _ => 2,
                    };
                    acc[slot] += 1;
                    break;
                }
            }
        },
        |a, b| {
            for k in 0..3 {
                a[k] += b[k];
            }
        },
    ))
}

/// Normalized Dirichlet kernel `D_N(x) = sin((2N+1) pi x) / ((2N+1) sin(pi x))`.
pub fn dirichlet_kernel(big_n: u32, x: f64) -> f64 {
    let x = x - x.round();
    if x == 0.0 {
        return 1.0;
    }
    let m = (2 * big_n + 1) as f64;
    (m * PI * x).sin() / (m * (PI * x).sin())
}

/// `c` with `|D_N(x)| <= 1 - c N^2 x^2` for `|x| <= 1/(2N)`.
///
/// From `1 - cos u >= 2u^2/pi^2` on `|u| <= pi` and the cosine-sum form; tight
/// at N = 1, x = 1/2.
pub const DIRICHLET_QUADRATIC_C: f64 = 8.0 / 3.0;

/// `c(eps)` with `|D_N(x)| <= 1 - c(eps)` for `eps/N <= |x| <= 1/2`.
///
/// Combines the quadratic bound below `1/(2N)` with `|D_N(x)| <= N/(2N+1)`
/// beyond it.
pub fn dirichlet_gap_constant(eps: f64) -> f64 {
    (DIRICHLET_QUADRATIC_C * eps * eps).min(0.5)
}

/// Brownian heat kernel on the unit torus,
/// `theta_t(x) = sum_k exp(-2 pi^2 t |k|^2) e(k.x)`.
///
/// The series factors over the two coordinates. For `t >= 0.05` the Fourier
/// series is summed; for smaller `t` the Poisson-dual sum of Gaussian images
/// is used instead, which converges fast there and is termwise positive.
#[derive(Clone, Debug)]
pub struct ThetaEvaluator {
    pub t: f64,
    /// Highest retained frequency (Fourier form) or image index (dual form).
    pub truncation: u32,
    pub tolerance: f64,
    dual: bool,
    /// Certified bound on the 2-d truncation error.
    pub tail_bound: f64,
}

const THETA_DUAL_BELOW: f64 = 0.05;

impl ThetaEvaluator {
    pub fn new(t: f64) -> Result<Self> {
        Self::with_tolerance(t, 1e-12)
    }

    pub fn with_tolerance(t: f64, tolerance: f64) -> Result<Self> {
        precondition(t > 0.0 && t.is_finite(), || format!("theta needs t > 0, got {t}"))?;
        precondition(tolerance > 0.0, || "theta tolerance must be positive".into())?;
        let dual = t < THETA_DUAL_BELOW;
        // 1-d sums in either form are bounded by `s_max`; the dropped 1-d mass
        // by `tau(K)`. The product error is then at most 2 s_max tau + tau^2.
        let (a, scale) = if dual { (1.0 / (2.0 * t), (2.0 * PI * t).powf(-0.5)) } else { (2.0 * PI * PI * t, 1.0) };
        let s_max = scale * (1.0 + 2.0 * (1.0 / (1.0 - (-a).exp())));
        let tau = |k: u32| -> f64 {
            // Sum over |j| > k of exp(-a j^2) (dual form: |x - m| >= k), via a
            // geometric majorant of the ratio of consecutive terms.
            let k1 = (k + 1) as f64;
            let lead = if dual { (-a * (k as f64).powi(2)).exp() } else { (-a * k1 * k1).exp() };
            let ratio = if dual { (-a * (2 * k + 1) as f64).exp() } else { (-a * (2.0 * k1 + 1.0)).exp() };
            2.0 * scale * lead / (1.0 - ratio)
        };
        let mut k = 1u32;
        loop {
            let tk = tau(k);
            let bound = 2.0 * s_max * tk + tk * tk;
            if bound < tolerance {
                return Ok(Self { t, truncation: k, tolerance, dual, tail_bound: bound });
            }
            k += 1;
            if k > 1_000_000 {
                return Err(Error::NotConverged(format!("theta truncation at t = {t}")));
            }
        }
    }

    fn one_dim(&self, x: f64) -> f64 {
        let k = self.truncation as i64;
        if self.dual {
            let x = x - x.floor();
            let mut s = 0.0;
            for m in -k..=k + 1 {
                let d = x - m as f64;
                s += (-d * d / (2.0 * self.t)).exp();
            }
            s / (2.0 * PI * self.t).sqrt()
        } else {
            let q = -2.0 * PI * PI * self.t;
            let mut s = 1.0;
            for j in 1..=k {
                let jf = j as f64;
                s += 2.0 * (q * jf * jf).exp() * (2.0 * PI * jf * x).cos();
            }
            s
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.one_dim(x) * self.one_dim(y)
    }

    /// `theta_t(i/n, j/n) / n^2` on the n x n grid, renormalized to total mass
    /// one (the raw grid sum differs from 1 by `O(exp(-2 pi^2 t n^2))`).
    /// Indexed like cells: `x * n + y`.
    pub fn grid_law(&self, n: u32) -> Vec<f64> {
        let cols: Vec<f64> = (0..n).map(|i| self.one_dim(i as f64 / n as f64)).collect();
        let mut law = Vec::with_capacity((n * n) as usize);
        for i in 0..n as usize {
            for j in 0..n as usize {
                law.push(cols[i] * cols[j]);
            }
        }
        let total: f64 = law.iter().sum();
        law.iter_mut().for_each(|v| *v /= total);
        law
    }
}

pub fn theta(t: f64, x: f64, y: f64) -> Result<f64> {
    Ok(ThetaEvaluator::new(t)?.eval(x, y))
}
