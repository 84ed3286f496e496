//! Renewal structure of a single marked piece, and the Monte-Carlo
//! experiments on single-piece laws and fixed points.
//!
//! The marked piece `P` moves only when the blank steps onto it, and then it
//! moves opposite to the blank. Stopping times: `t_0` is the first vertical
//! swap; `t_{2i-1}` is the first horizontal swap after `t_{2i-2}`, and `t_{2i}`
//! the first vertical swap after `t_{2i-1}`. `H_i` is the horizontal
//! displacement in `[t_{2i-1}, t_{2i})`, `V_i` the vertical one in
//! `[t_{2i}, t_{2i+1})`. Right and up are positive.

use std::f64::consts::PI;

use rand_distr::{Binomial, Distribution};

use crate::error::{precondition, Result};
use crate::parallel::fold_trials;
use crate::rng::{trial_rng, MoveSource, StreamRng};
use crate::torus_core::ReturnProbabilities;

/// `(5/2)(pi - 1)`: chain steps per `n^4` unit of Brownian time.
pub const C_PUZ: f64 = 2.5 * (PI - 1.0);

/// Scaling constants of the renewal process implied by return probabilities.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct RenewalConstants {
    /// `lim E[H_1^2]`.
    pub s2: f64,
    /// `lim E[r_1] / n^2`.
    pub mu_over_n2: f64,
    /// `2 mu / s^2`.
    pub c_puz: f64,
}

impl RenewalConstants {
    /// From first-return probabilities; at finite n the walk time per piece
    /// move is `(5/4)(n^2 - 1)`, in the limit `(5/4) n^2`.
    pub fn from_returns(p: &ReturnProbabilities, n: Option<u32>) -> Self {
        let s2 = (1.0 / (2.0 * p.vertical)) * (1.0 - p.same + p.opposite) / (1.0 + p.same - p.opposite);
        let area = n.map(|n| 1.0 - 1.0 / (n as f64 * n as f64)).unwrap_or(1.0);
        let mu_over_n2 = 1.25 * area / (2.0 * p.vertical);
        Self { s2, mu_over_n2, c_puz: 2.0 * mu_over_n2 / s2 }
    }

    pub fn planar() -> Self {
        Self::from_returns(&ReturnProbabilities::planar_limit(), None)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RenewalRecord {
    pub n: u32,
    /// `t_0, t_1, ..., t_{2N+1}` in chain steps.
    pub t: Vec<u64>,
    pub h: Vec<i64>,
    pub v: Vec<i64>,
    pub r: Vec<u64>,
    pub s: Vec<u64>,
    /// Extra horizontal moves in each `[t_{2i-1}, t_{2i})` beyond the first.
    pub m: Vec<u32>,
    /// Extra vertical moves in each `[t_{2i}, t_{2i+1})` beyond the first.
    pub nn: Vec<u32>,
    pub h0: i64,
    pub v0: i64,
}

impl RenewalRecord {
    pub fn pairs(&self) -> usize {
        self.h.len()
    }

    /// Checks monotone times, positive durations and strict alternation of
    /// the swap directions at the stopping times.
    pub fn alternation_holds(&self, swaps: &[(u64, bool)]) -> bool {
        let increasing = self.t.windows(2).all(|w| w[0] < w[1]);
        let positive = self.r.iter().chain(&self.s).all(|&d| d >= 1);
        let alternate = self.t.iter().enumerate().all(|(k, &tk)| {
            swaps.iter().find(|(t, _)| *t == tk).map(|&(_, horiz)| horiz == (k % 2 == 1)).unwrap_or(false)
        });
        increasing && positive && alternate
    }
}

/// Simulates the piece-plus-blank chain for piece 1 of the sorted board until
/// `pairs` complete `(H_i, r_i)` and `(V_i, s_i)` pairs are recorded.
/// With `log_swaps` every swap `(step, horizontal)` is also returned.
pub fn track_renewals_logged(
    n: u32,
    pairs: usize,
    rng: StreamRng,
    log_swaps: bool,
) -> Result<(RenewalRecord, Vec<(u64, bool)>)> {
    precondition(n >= 4, || format!("renewal tracking needs n >= 4, got {n}"))?;
    let m = n as i64;
    let mut src = MoveSource::new(rng);
    // blank minus piece; piece 1 starts at (0, n-1), blank at (n-1, 0)
    let (mut dx, mut dy) = (m - 1, 1i64);
    let mut rec = RenewalRecord { n, ..Default::default() };
    let mut swaps = Vec::new();
    let last = 2 * pairs + 1;
    let mut phase = 0usize;
    let (mut pre_h, mut pre_v) = (0i64, 0i64);
    let (mut acc, mut count) = (0i64, 0u32);
    let mut step = 0u64;
    while phase <= last {
        step += 1;
        let mv = src.lazy();
        let (sx, sy): (i64, i64) = match mv {
            0 => continue,
            1 => (1, 0),
            2 => (-1, 0),
            3 => (0, 1),
            _ => (0, -1),
        };
        let (nx, ny) = ((dx + sx).rem_euclid(m), (dy + sy).rem_euclid(m));
        if nx != 0 || ny != 0 {
            dx = nx;
            dy = ny;
            continue;
        }
        // swap: the piece moves by -(sx, sy), the blank ends on the far side
        dx = sx.rem_euclid(m);
        dy = sy.rem_euclid(m);
        let horiz = sx != 0;
        let disp = if horiz { -sx } else { -sy };
        if log_swaps {
            swaps.push((step, horiz));
        }
        if horiz == (phase % 2 == 1) {
            rec.t.push(step);
            match phase {
                0 => pre_v += disp,
                1 => {
                    rec.h0 = pre_h;
                    rec.v0 = pre_v;
                }
                k if k % 2 == 0 => {
                    rec.h.push(acc);
                    rec.r.push(step - rec.t[k - 1]);
                    rec.m.push(count - 1);
                }
                k => {
                    rec.v.push(acc);
                    rec.s.push(step - rec.t[k - 1]);
                    rec.nn.push(count - 1);
                }
            }
            phase += 1;
            acc = disp;
            count = 1;
        } else if phase <= 1 {
            if horiz {
                pre_h += disp;
            } else {
                pre_v += disp;
            }
        } else {
            acc += disp;
            count += 1;
        }
    }
    Ok((rec, swaps))
}

pub fn track_renewals(n: u32, pairs: usize, rng: StreamRng) -> Result<RenewalRecord> {
    Ok(track_renewals_logged(n, pairs, rng, false)?.0)
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct RenewalMoments {
    pub s2: Estimate,
    pub mu: Estimate,
    pub v2: Estimate,
    pub c_puz_hat: Estimate,
    pub mean_h: Estimate,
    pub mean_m: Estimate,
    /// Number of pooled `(H, r)` and `(V, s)` units.
    pub units: usize,
}

impl RenewalMoments {
    pub fn mu_over_n2(&self, n: u32) -> Estimate {
        let a = (n as f64).powi(2);
        Estimate { value: self.mu.value / a, se: self.mu.se / a }
    }
}

/// Plug-in moments pooled over the `(H_i, r_i)` and `(V_i, s_i)` units, which
/// are i.i.d. The ratio `c_puz_hat` gets a delete-one jackknife error.
pub fn renewal_moments(rec: &RenewalRecord) -> Result<RenewalMoments> {
    let k = rec.h.len().min(rec.v.len());
    precondition(k >= 1000, || format!("renewal moments need >= 1000 pairs, got {k}"))?;
    let disp: Vec<f64> = rec.h[..k].iter().chain(&rec.v[..k]).map(|&x| x as f64).collect();
    let dur: Vec<f64> = rec.r[..k].iter().chain(&rec.s[..k]).map(|&x| x as f64).collect();
    let extra: Vec<f64> = rec.m[..k].iter().chain(&rec.nn[..k]).map(|&x| x as f64).collect();
    let units = disp.len();
    let sq: Vec<f64> = disp.iter().map(|x| x * x).collect();
    let n2 = (rec.n as f64).powi(2);
    let sum_sq: f64 = sq.iter().sum();
    let sum_r: f64 = dur.iter().sum();
    let c_full = 2.0 * sum_r / (n2 * sum_sq);
    let leave_one: Vec<f64> = (0..units).map(|i| 2.0 * (sum_r - dur[i]) / (n2 * (sum_sq - sq[i]))).collect();
    let v2 = variance(&dur);
    let sum_r2: f64 = dur.iter().map(|x| x * x).sum();
    let u = units as f64;
    let v2_loo: Vec<f64> = dur
        .iter()
        .map(|&x| {
            let s1 = sum_r - x;
            let s2 = sum_r2 - x * x;
            (s2 - s1 * s1 / (u - 1.0)) / (u - 2.0)
        })
        .collect();
    Ok(RenewalMoments {
        s2: mean_estimate(&sq),
        mu: mean_estimate(&dur),
        v2: Estimate { value: v2, se: jackknife_se(&v2_loo) },
        c_puz_hat: Estimate { value: c_full, se: jackknife_se(&leave_one) },
        mean_h: mean_estimate(&disp),
        mean_m: mean_estimate(&extra),
        units,
    })
}

pub fn mean_estimate(x: &[f64]) -> Estimate {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    Estimate { value: mean, se: (variance(x) / n).sqrt() }
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn jackknife_se(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / n;
    ((n - 1.0) / n * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
}

/// Histogram of the displacement (mod n) of piece 1 after `steps` chain steps.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SinglePieceLaw {
    pub n: u32,
    pub steps: u64,
    pub trials: u64,
    /// Indexed like cells, `x * n + y`.
    pub counts: Vec<u64>,
}

impl SinglePieceLaw {
    pub fn empirical(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.trials as f64).collect()
    }

    pub fn tv_to(&self, law: &[f64]) -> f64 {
        total_variation(&self.empirical(), law)
    }
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Steps for scaled time `t`: `floor(c_puz n^4 t)`.
pub fn scaled_steps(n: u32, t: f64) -> u64 {
    (C_PUZ * (n as f64).powi(4) * t).floor() as u64
}

/// Runs `trials` independent copies of the piece-plus-blank chain for
/// `steps` steps. Holds never move anything, so each trial draws its number
/// of blank moves from `Binomial(steps, 4/5)` and simulates only those.
pub fn single_piece_law(n: u32, steps: u64, trials: u64, seed: u64) -> Result<SinglePieceLaw> {
    precondition(n >= 3, || format!("single-piece law needs n >= 3, got {n}"))?;
    let moves = Binomial::new(steps, 0.8).map_err(|e| crate::Error::Precondition(e.to_string()))?;
    let m = n as i32;
    let cells = (n * n) as usize;
    let counts = fold_trials(
        trials,
        || vec![0u64; cells],
        |acc, i| {
            let mut rng = trial_rng(seed, i);
            let k = moves.sample(&mut rng);
            let mut src = MoveSource::new(rng);
            let (mut dx, mut dy) = (m - 1, 1i32);
            let (mut px, mut py) = (0i32, 0i32);
            for _ in 0..k {
                match src.direction() {
                    0 => {
                        dx = if dx + 1 == m { 0 } else { dx + 1 };
                        if dx == 0 && dy == 0 {
                            px -= 1;
                            dx = 1;
                        }
                    }
                    1 => {
                        dx = if dx == 0 { m - 1 } else { dx - 1 };
                        if dx == 0 && dy == 0 {
                            px += 1;
                            dx = m - 1;
                        }
                    }
                    2 => {
                        dy = if dy + 1 == m { 0 } else { dy + 1 };
                        if dx == 0 && dy == 0 {
                            py -= 1;
                            dy = 1;
                        }
                    }
                    _ => {
                        dy = if dy == 0 { m - 1 } else { dy - 1 };
                        if dx == 0 && dy == 0 {
                            py += 1;
                            dy = m - 1;
                        }
                    }
                }
            }
            let cell = px.rem_euclid(m) as usize * n as usize + py.rem_euclid(m) as usize;
            acc[cell] += 1;
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    );
    Ok(SinglePieceLaw { n, steps, trials, counts })
}

/// Mean and standard deviation of the plug-in TV between `samples` i.i.d.
/// draws from `law` and `law` itself: the estimator's noise floor.
pub fn plugin_tv_floor(law: &[f64], samples: u64, replicates: u64, seed: u64) -> Estimate {
    let vals: Vec<f64> = (0..replicates)
        .map(|r| {
            let mut rng = trial_rng(seed, r);
            let counts = multinomial(law, samples, &mut rng);
            let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
            total_variation(&emp, law)
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = if vals.len() > 1 { variance(&vals).sqrt() } else { 0.0 };
    Estimate { value: mean, se: sd }
}

/// Exact multinomial draw by sequential conditional binomials.
pub fn multinomial(law: &[f64], samples: u64, rng: &mut StreamRng) -> Vec<u64> {
    let mut left = samples;
    let mut mass = 1.0f64;
    let mut out = vec![0u64; law.len()];
    for (i, &p) in law.iter().enumerate() {
        if left == 0 {
            break;
        }
        let q = if i + 1 == law.len() || mass <= 0.0 { 1.0 } else { (p / mass).clamp(0.0, 1.0) };
        let k = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(left);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FixedPointReport {
    pub n: u32,
    pub steps: u64,
    pub trials: u64,
    /// `histogram[k]` is the frequency of exactly `k` fixed pieces.
    pub histogram: Vec<f64>,
    pub mean: Estimate,
    /// `E_d = E[binom(F, d)]` for `d = 1..=4`.
    pub e_d: Vec<Estimate>,
    /// Poisson(1) mass on `0..histogram.len()`.
    pub poisson: Vec<f64>,
    /// TV to Poisson(1), including the Poisson tail beyond the histogram.
    pub tv_poisson: f64,
}

/// Full-board simulation from the sorted board, counting pieces on their home
/// cells after `steps` chain steps.
pub fn fixed_point_experiment(n: u32, steps: u64, trials: u64, seed: u64) -> Result<FixedPointReport> {
    precondition(n >= 3, || format!("fixed-point experiment needs n >= 3, got {n}"))?;
    precondition(trials >= 2, || "need at least two trials".into())?;
    let moves = Binomial::new(steps, 0.8).map_err(|e| crate::Error::Precondition(e.to_string()))?;
    let cells = (n * n) as usize;
    let start = crate::chains::PuzzleState::sorted(n);
    let home: Vec<u16> = start.tiles().to_vec();
    let neighbor: Vec<[u32; 4]> = (0..cells)
        .map(|c| crate::torus_core::TorusPoint::from_index(c, n).neighbors().map(|q| q.index() as u32))
        .collect();
    let blank0 = start.blank().index();
    const D: usize = 4;
    // per trial: histogram bump, sum of binom(F, d) and their squares
    let (hist, sums, squares) = fold_trials(
        trials,
        || (vec![0u64; cells], [0f64; D + 1], [0f64; D + 1]),
        |acc, i| {
            let mut rng = trial_rng(seed, i);
            let k = moves.sample(&mut rng);
            let mut src = MoveSource::new(rng);
            let mut tiles = home.clone();
            let mut b = blank0;
            for _ in 0..k {
                let t = neighbor[b][src.direction() as usize] as usize;
                tiles[b] = tiles[t];
                tiles[t] = 0;
                b = t;
            }
            let f = tiles.iter().zip(&home).filter(|(a, h)| **a != 0 && a == h).count();
            acc.0[f] += 1;
            for d in 0..=D {
                let c = binomial(f as u64, d as u64);
                acc.1[d] += c;
                acc.2[d] += c * c;
            }
        },
        |a, b| {
            a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
            (0..=D).for_each(|d| {
                a.1[d] += b.1[d];
                a.2[d] += b.2[d];
            });
        },
    );
    let tf = trials as f64;
    let est = |d: usize| {
        let mean = sums[d] / tf;
        let var = (squares[d] - tf * mean * mean) / (tf - 1.0);
        Estimate { value: mean, se: (var.max(0.0) / tf).sqrt() }
    };
    let histogram: Vec<f64> = hist.iter().map(|&c| c as f64 / tf).collect();
    let poisson: Vec<f64> = (0..cells).map(|k| poisson_pmf(1.0, k as u64)).collect();
    let tail = 1.0 - poisson.iter().sum::<f64>();
    let tv_poisson = 0.5 * (histogram.iter().zip(&poisson).map(|(a, b)| (a - b).abs()).sum::<f64>() + tail.max(0.0));
    Ok(FixedPointReport {
        n,
        steps,
        trials,
        histogram,
        mean: est(1),
        e_d: (1..=D).map(est).collect(),
        poisson,
        tv_poisson,
    })
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    (-lambda + k as f64 * lambda.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp()
}
