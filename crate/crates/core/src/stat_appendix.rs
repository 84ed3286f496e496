//! Concentration inequalities and the smoothing weights `omega_t(k)`.
//!
//! Every inequality here is a theorem, so the validators expect zero
//! violations; a violation means a bug. Bounds written with an unspecified
//! implied constant are evaluated with that constant set to 1.

use std::f64::consts::PI;

use quadrature::double_exponential;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Geometric};
use statrs::function::gamma::ln_gamma;

use crate::error::{precondition, Error, Result};
use crate::rng::{trial_rng, StreamRng};

const QUAD_TOL: f64 = 1e-12;

fn bump_raw(s: f64) -> f64 {
    let u = 2.0 * s - 3.0;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// The smooth bump on `[1, 2]` with unit mass used to build `Phi_t`.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    norm: f64,
}

impl Bump {
    pub fn new() -> Self {
        let norm = double_exponential::integrate(bump_raw, 1.0, 2.0, QUAD_TOL).integral;
        Self { norm }
    }

    pub fn eval(&self, s: f64) -> f64 {
        bump_raw(s) / self.norm
    }
}

impl Default for Bump {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct WeightTable {
    pub t: f64,
    pub k_min: u64,
    /// `weights[i] = omega_t(k_min + i)`.
    pub weights: Vec<f64>,
    pub total: f64,
    pub sup: f64,
    /// `sup_k |omega_t(k+1) - omega_t(k)|`.
    pub derivative_sup: f64,
    pub max_quadrature_error: f64,
}

impl WeightTable {
    pub fn weight(&self, k: u64) -> f64 {
        k.checked_sub(self.k_min).and_then(|i| self.weights.get(i as usize)).copied().unwrap_or(0.0)
    }

    /// Weight outside `[(1 - eps) t, (2 + eps) t]`, summed directly.
    pub fn mass_outside(&self, eps: f64) -> f64 {
        let (lo, hi) = ((1.0 - eps) * self.t, (2.0 + eps) * self.t);
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let k = (self.k_min + *i as u64) as f64;
                k < lo || k > hi
            })
            .map(|(_, w)| w)
            .sum()
    }
}

/// Default range covering all but a negligible part of the mass.
pub fn default_k_range(t: f64) -> (u64, u64) {
    let hi = 2.0 * t + 12.0 * (2.0 * t).sqrt() + 50.0;
    (0, hi.ceil() as u64)
}

/// `omega_t(k) = int phi(s) e^{-st} (st)^k / Gamma(k+1) ds` for `k` in `range`.
pub fn omega_weights(t: f64, range: (u64, u64)) -> Result<WeightTable> {
    precondition(t >= 10.0, || format!("omega weights need t >= 10, got {t}"))?;
    precondition(range.0 <= range.1, || "empty k range".into())?;
    let bump = Bump::new();
    let mut weights = Vec::with_capacity((range.1 - range.0 + 1) as usize);
    let mut max_err = 0f64;
    for k in range.0..=range.1 {
        let kf = k as f64;
        let lg = ln_gamma(kf + 1.0);
        let f = |s: f64| {
            let b = bump.eval(s);
            if b == 0.0 {
                return 0.0;
            }
            let st = s * t;
            b * (-st + kf * st.ln() - lg).exp()
        };
        let out = double_exponential::integrate(f, 1.0, 2.0, QUAD_TOL);
        if !out.integral.is_finite() {
            return Err(Error::NotConverged(format!("omega quadrature at t = {t}, k = {k}")));
        }
        max_err = max_err.max(out.error_estimate);
        weights.push(out.integral.max(0.0));
    }
    let total = weights.iter().sum();
    let sup = weights.iter().cloned().fold(0.0, f64::max);
    let derivative_sup = weights.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    Ok(WeightTable { t, k_min: range.0, weights, total, sup, derivative_sup, max_quadrature_error: max_err })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct OmegaReport {
    pub t: Vec<f64>,
    pub total: Vec<f64>,
    /// `t sup_k omega_t(k)`.
    pub sup_constant: Vec<f64>,
    /// `t^2 sup_k |D omega_t(k)|`.
    pub derivative_constant: Vec<f64>,
    pub eps: f64,
    pub mass_outside: Vec<f64>,
    /// `c` from regressing `log(mass outside)` on `-eps t` (free intercept).
    pub tail_rate: f64,
}

impl OmegaReport {
    pub fn sup_constant_spread(&self) -> f64 {
        spread(&self.sup_constant)
    }

    pub fn derivative_constant_spread(&self) -> f64 {
        spread(&self.derivative_constant)
    }
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

pub fn omega_report(ts: &[f64], eps: f64) -> Result<OmegaReport> {
    let tables: Vec<WeightTable> = ts.iter().map(|&t| omega_weights(t, default_k_range(t))).collect::<Result<_>>()?;
    let mass_outside: Vec<f64> = tables.iter().map(|w| w.mass_outside(eps)).collect();
    Ok(OmegaReport {
        t: ts.to_vec(),
        total: tables.iter().map(|w| w.total).collect(),
        sup_constant: tables.iter().map(|w| w.t * w.sup).collect(),
        derivative_constant: tables.iter().map(|w| w.t * w.t * w.derivative_sup).collect(),
        eps,
        tail_rate: {
            let x: Vec<f64> = ts.iter().map(|t| -eps * t).collect();
            let y: Vec<f64> = mass_outside.iter().map(|m| m.ln()).collect();
            crate::coupling_sim::linear_fit(&x, &y).0
        },
        mass_outside,
    })
}

/// `ln(e^{-t} t^k / k!)`.
pub fn ln_poisson(t: f64, k: f64) -> f64 {
    -t + k * t.ln() - ln_gamma(k + 1.0)
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PoissonWindow {
    pub t: f64,
    pub k: u64,
    pub exact: f64,
    pub stirling_approx: f64,
    pub relative_error: f64,
    /// `relative_error / (1/k + |t-k|^3/k^2)`.
    pub error_constant: f64,
}

/// Poisson weight against its Gaussian window approximation.
pub fn poisson_window_check(t: f64, k: u64) -> Result<PoissonWindow> {
    let kf = k as f64;
    precondition(k >= 1 && (t - kf).abs() < kf.powf(2.0 / 3.0), || {
        format!("need |t - k| < k^(2/3), got t = {t}, k = {k}")
    })?;
    let exact = ln_poisson(t, kf).exp();
    let stirling_approx = (-(t - kf).powi(2) / (2.0 * kf)).exp() / (2.0 * PI * kf).sqrt();
    let relative_error = (exact / stirling_approx - 1.0).abs();
    let scale = 1.0 / kf + (t - kf).abs().powi(3) / (kf * kf);
    Ok(PoissonWindow { t, k, exact, stirling_approx, relative_error, error_constant: relative_error / scale })
}

/// `f(eps) = (1 + eps) log(1 + eps) - eps`.
pub fn rate_function(eps: f64) -> f64 {
    (1.0 + eps) * (1.0 + eps).ln() - eps
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct HeatTail {
    pub t: f64,
    pub eps: f64,
    pub lower_tail: f64,
    pub lower_bound: f64,
    pub upper_tail: f64,
    pub upper_bound: f64,
}

impl HeatTail {
    pub fn holds(&self) -> bool {
        self.lower_tail <= self.lower_bound && self.upper_tail <= self.upper_bound
    }
}

/// Exact Poisson tails `P(K <= (1-eps)t)` and `P(K >= (1+eps)t)` against
/// `exp(-f(-eps) t)` and `exp(-f(eps) t)`.
pub fn heat_kernel_tails(t: f64, eps: f64) -> Result<HeatTail> {
    precondition(t > 0.0 && eps > 0.0 && eps < 1.0, || format!("need t > 0, 0 < eps < 1 (t = {t}, eps = {eps})"))?;
    let lo = ((1.0 - eps) * t + 1e-9).floor() as u64;
    let hi = ((1.0 + eps) * t - 1e-9).ceil() as u64;
    let lower_tail = (0..=lo).map(|k| ln_poisson(t, k as f64).exp()).sum();
    let top = hi + (40.0 * t.sqrt()) as u64 + 100;
    let upper_tail = (hi..=top).map(|k| ln_poisson(t, k as f64).exp()).sum();
    Ok(HeatTail {
        t,
        eps,
        lower_tail,
        lower_bound: (-rate_function(-eps) * t).exp(),
        upper_tail,
        upper_bound: (-rate_function(eps) * t).exp(),
    })
}

/// One tail comparison: `value` should not exceed `bound`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TailCheck {
    pub n: u64,
    pub lambda: f64,
    pub exact: Option<f64>,
    pub empirical: Option<f64>,
    pub bound: f64,
}

impl TailCheck {
    /// Exact values must obey the bound; empirical ones up to 3 binomial
    /// standard errors.
    pub fn holds(&self, samples: u64) -> bool {
        let exact_ok = self.exact.map_or(true, |e| e <= self.bound * (1.0 + 1e-12));
        let emp_ok = self.empirical.map_or(true, |p| {
            let se = (p * (1.0 - p) / samples as f64).sqrt().max(1.0 / samples as f64);
            p <= self.bound + 3.0 * se
        });
        exact_ok && emp_ok
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ReflectionRow {
    pub lambda: f64,
    pub max_tail: f64,
    pub twice_end_tail: f64,
}

/// Exhaustive `P(max_j S_j > lambda)` and `2 P(S_n > lambda)` over all
/// `2^n` sign sequences.
pub fn reflection_enumeration(n: u32, lambdas: &[f64]) -> Result<Vec<ReflectionRow>> {
    precondition(n <= 24, || format!("exhaustive enumeration needs n <= 24, got {n}"))?;
    let total = 1u64 << n;
    let mut max_hist = vec![0u64; n as usize + 1];
    let mut end_hist = vec![0u64; 2 * n as usize + 1];
    for mask in 0..total {
        let (mut s, mut m) = (0i64, 0i64);
        for i in 0..n {
            s += if mask >> i & 1 == 1 { 1 } else { -1 };
            m = m.max(s);
        }
        max_hist[m as usize] += 1;
        end_hist[(s + n as i64) as usize] += 1;
    }
    let tf = total as f64;
    Ok(lambdas
        .iter()
        .map(|&l| {
            let max_tail = max_hist.iter().enumerate().filter(|(m, _)| *m as f64 > l).map(|(_, c)| *c).sum::<u64>() as f64 / tf;
            let end_tail = end_hist
                .iter()
                .enumerate()
                .filter(|(s, _)| (*s as i64 - n as i64) as f64 > l)
                .map(|(_, c)| *c)
                .sum::<u64>() as f64
                / tf;
            ReflectionRow { lambda: l, max_tail, twice_end_tail: 2.0 * end_tail }
        })
        .collect())
}

/// Exact law of `max_{j <= n} S_j` for the symmetric +-1 walk (with `S_0 = 0`).
pub fn walk_max_law(n: u32) -> Vec<f64> {
    let w = n as usize;
    // state (position + n, running max)
    let mut cur = vec![vec![0f64; w + 1]; 2 * w + 1];
    cur[w][0] = 1.0;
    for _ in 0..n {
        let mut next = vec![vec![0f64; w + 1]; 2 * w + 1];
        for (p, row) in cur.iter().enumerate() {
            for (m, &mass) in row.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                if p > 0 {
                    next[p - 1][m] += 0.5 * mass;
                }
                if p < 2 * w {
                    let up = p + 1;
                    let new_max = m.max(up.saturating_sub(w));
                    next[up][new_max] += 0.5 * mass;
                }
            }
        }
        cur = next;
    }
    let mut law = vec![0f64; w + 1];
    for row in &cur {
        for (m, &mass) in row.iter().enumerate() {
            law[m] += mass;
        }
    }
    law
}

fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
        + k as f64 * p.ln()
        + (n - k) as f64 * (1.0 - p).ln()
}

/// Exact `P(|Bin(n,p) - np| > lambda)`.
pub fn centered_bernoulli_tail(n: u64, p: f64, lambda: f64) -> f64 {
    (0..=n)
        .filter(|&k| (k as f64 - n as f64 * p).abs() > lambda)
        .map(|k| if p == 0.0 || p == 1.0 { 0.0 } else { ln_binomial_pmf(n, k, p).exp() })
        .sum()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AppendixReport {
    pub samples: u64,
    pub reflection_identity: Vec<ReflectionRow>,
    pub walk_maximum: Vec<TailCheck>,
    pub bernoulli: Vec<TailCheck>,
    pub chernoff: Vec<TailCheck>,
    pub chernoff_variant: Vec<TailCheck>,
    pub heat_kernel: Vec<HeatTail>,
    pub stirling_window: Vec<PoissonWindow>,
    pub omega: OmegaReport,
}

impl AppendixReport {
    /// Every inequality holds and the reflection identity is exact at the
    /// thresholds where it can be.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = self.samples;
        let named = [
            ("walk_maximum", &self.walk_maximum),
            ("bernoulli", &self.bernoulli),
            ("chernoff", &self.chernoff),
            ("chernoff_variant", &self.chernoff_variant),
        ];
        for (name, rows) in named {
            for r in rows.iter().filter(|r| !r.holds(s)) {
                out.push(format!("{name}: n = {}, lambda = {}", r.n, r.lambda));
            }
        }
        for r in &self.reflection_identity {
            if r.max_tail > r.twice_end_tail + 1e-15 {
                out.push(format!("reflection inequality at lambda = {}", r.lambda));
            }
        }
        for h in self.heat_kernel.iter().filter(|h| !h.holds()) {
            out.push(format!("heat_kernel: t = {}, eps = {}", h.t, h.eps));
        }
        for (t, m) in self.omega.t.iter().zip(&self.omega.mass_outside) {
            if *m > 1.0 {
                out.push(format!("omega tail mass above 1 at t = {t}"));
            }
        }
        out
    }
}

fn geometric_variant_check(rng: &mut StreamRng, n: u64, p: f64, lambdas: &[f64], samples: u64) -> Vec<TailCheck> {
    // failures before the first success: mean (1-p)/p, variance (1-p)/p^2,
    // P(X > z) = (1-p)^{z+1} <= e^{-cz} with c = -log(1-p)
    let geo = Geometric::new(p).expect("valid success probability");
    let mean = (1.0 - p) / p;
    let sigma = ((1.0 - p) / (p * p)).sqrt();
    let c = -(1.0 - p).ln();
    let c1 = (c * sigma).sqrt() / 2.0;
    let nf = n as f64;
    let devs: Vec<f64> = (0..samples)
        .map(|_| {
            let x: u64 = (0..n).map(|_| geo.sample(rng)).sum();
            (x as f64 - nf * mean).abs()
        })
        .collect();
    lambdas
        .iter()
        .map(|&l| {
            let hits = devs.iter().filter(|&&d| d >= l * sigma * nf.sqrt()).count();
            TailCheck {
                n,
                lambda: l,
                exact: None,
                empirical: Some(hits as f64 / samples as f64),
                bound: (-l * l / 16.0).exp() + nf * (-c1 * l.sqrt() * nf.powf(0.25)).exp(),
            }
        })
        .collect()
}

/// Runs every validator. Randomized parts use stream 0 of `seed`.
pub fn concentration_validators(seed: u64, samples: u64) -> Result<AppendixReport> {
    precondition(samples >= 100, || "need at least 100 samples".into())?;
    let mut rng = trial_rng(seed, 0);

    let reflection_identity = reflection_enumeration(10, &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.5, 5.0, 6.5, 8.5])?;

    let walk_n = 100u32;
    let law = walk_max_law(walk_n);
    let mut max_draws = vec![0u64; walk_n as usize + 1];
    for _ in 0..samples {
        let (mut s, mut m) = (0i64, 0i64);
        let mut left = walk_n;
        while left > 0 {
            let bits = rng.next_u64();
            let take = left.min(64);
            for i in 0..take {
                s += if bits >> i & 1 == 1 { 1 } else { -1 };
                m = m.max(s);
            }
            left -= take;
        }
        max_draws[m as usize] += 1;
    }
    let walk_maximum = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
        .iter()
        .map(|&l: &f64| {
            let exact = law.iter().enumerate().filter(|(m, _)| *m as f64 > l).map(|(_, p)| p).sum();
            let emp = max_draws.iter().enumerate().filter(|(m, _)| *m as f64 > l).map(|(_, c)| *c).sum::<u64>();
            TailCheck {
                n: walk_n as u64,
                lambda: l,
                exact: Some(exact),
                empirical: Some(emp as f64 / samples as f64),
                bound: 2.0 * (-l * l / (2.0 * walk_n as f64)).exp(),
            }
        })
        .collect();

    let bern_n = 100u64;
    let mut bernoulli = Vec::new();
    let mut chernoff = Vec::new();
    for p in [0.1, 0.5] {
        let sums: Vec<f64> = (0..samples)
            .map(|_| (0..bern_n).filter(|_| rng.random_bool(p)).count() as f64 - bern_n as f64 * p)
            .collect();
        let sigma = (bern_n as f64 * p * (1.0 - p)).sqrt();
        for l in [1.0, 3.0, 5.0, 8.0, 10.0, 15.0] {
            let emp = sums.iter().filter(|s| s.abs() > l).count() as f64 / samples as f64;
            bernoulli.push(TailCheck {
                n: bern_n,
                lambda: l,
                exact: Some(centered_bernoulli_tail(bern_n, p, l)),
                empirical: Some(emp),
                bound: 2.0 * (-2.0 * l * l / bern_n as f64).exp(),
            });
        }
        for l in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let exact: f64 = (0..=bern_n)
                .filter(|&k| k as f64 - bern_n as f64 * p >= l * sigma)
                .map(|k| ln_binomial_pmf(bern_n, k, p).exp())
                .sum();
            let emp = sums.iter().filter(|&&s| s >= l * sigma).count() as f64 / samples as f64;
            chernoff.push(TailCheck {
                n: bern_n,
                lambda: l,
                exact: Some(exact),
                empirical: Some(emp),
                bound: (-l * l / 4.0).exp().max((-l * sigma / 2.0).exp()),
            });
        }
    }

    let chernoff_variant = [(64u64, 0.3), (256, 0.5)]
        .iter()
        .flat_map(|&(n, p)| geometric_variant_check(&mut rng, n, p, &[1.5, 2.0, 3.0, 4.0, 6.0], samples))
        .collect();

    let heat_kernel = [(100.0, 0.1), (100.0, 0.3), (1000.0, 0.1), (1000.0, 0.3)]
        .iter()
        .map(|&(t, e)| heat_kernel_tails(t, e))
        .collect::<Result<_>>()?;

    let stirling_window = [(1e4, 10_000u64), (10_050.0, 10_000), (1e3, 1_000), (1_020.0, 1_000), (100.0, 100)]
        .iter()
        .map(|&(t, k)| poisson_window_check(t, k))
        .collect::<Result<_>>()?;

    let omega = omega_report(&[50.0, 100.0, 200.0], 0.1)?;

    Ok(AppendixReport {
        samples,
        reflection_identity,
        walk_maximum,
        bernoulli,
        chernoff,
        chernoff_variant,
        heat_kernel,
        stirling_window,
        omega,
    })
}
