//! Coalescing coupling of two copies of the d-piece marginal chain.
//!
//! Every step draws copy a's lazy move uniformly and maps it through a
//! bijection of the five moves to get copy b's move (or, in the independent
//! stage, draws b's move separately). Either way each copy on its own is an
//! exact run of the marginal chain.
//!
//! Stages, repeated until both copies agree:
//! 1. blanks apart: opposite moves on both axes; once one axis agrees, that
//!    axis is mirrored and the other stays opposite;
//! 2. blanks together: identical moves until an uncoalesced pair of pieces is
//!    within l-infinity distance 2 and their midpoint `(a + b)/2 mod n` is
//!    within 2 of both;
//! 3. independent moves until the blanks' midpoint equals the pair's;
//! 4. opposite moves, which keep the blanks' midpoint fixed, until the pair
//!    coincides.
//!
//! Stage 3 or 4 running past its cap sends the coupling back to stage 1.

use std::io::Write;

use rand::RngCore;

use crate::chains::MarginalState;
use crate::error::{precondition, Result};
use crate::parallel::map_trials;
use crate::rng::{trial_rng, MoveSource};
use crate::torus_core::{Move, TorusPoint};

/// Default cap, in chain steps, on stages 3 and 4.
pub const DEFAULT_STAGE_CAP: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Stage {
    BlankMeet,
    Together,
    Independent,
    Opposed,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::BlankMeet, Stage::Together, Stage::Independent, Stage::Opposed];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledState {
    pub a: MarginalState,
    pub b: MarginalState,
}

impl CoupledState {
    pub fn new(a: MarginalState, b: MarginalState) -> Result<Self> {
        precondition(a.n == b.n && a.pieces.len() == b.pieces.len(), || "copies must have the same shape".into())?;
        Ok(Self { a, b })
    }

    /// Copy a sorted, copy b uniform on the marginal state space.
    pub fn sorted_vs_uniform<R: RngCore>(n: u32, d: usize, rng: &mut R) -> Result<Self> {
        precondition(d + 1 <= (n * n) as usize, || "too many pieces for the board".into())?;
        let a = MarginalState::sorted(n, d);
        let cells = (n * n) as usize;
        let mut pool: Vec<usize> = (0..cells).collect();
        // partial Fisher-Yates for d + 1 distinct cells
        for i in 0..=d {
            let j = i + (rng.next_u64() % (cells - i) as u64) as usize;
            pool.swap(i, j);
        }
        let pts: Vec<TorusPoint> = pool[..=d].iter().map(|&c| TorusPoint::from_index(c, n)).collect();
        let b = MarginalState::new(n, pts[..d].to_vec(), pts[d])?;
        Self::new(a, b)
    }

    pub fn coalesced(&self) -> bool {
        self.a == self.b
    }

    /// Which pieces coincide across copies; the last entry is the blank.
    pub fn coalesced_pieces(&self) -> Vec<bool> {
        let mut out: Vec<bool> = self.a.pieces.iter().zip(&self.b.pieces).map(|(p, q)| p == q).collect();
        out.push(self.a.blank == self.b.blank);
        out
    }
}

fn flip(m: Move, horizontal: bool, vertical: bool) -> Move {
    let f = if m.is_horizontal() { horizontal } else { vertical };
    if f { m.inverse() } else { m }
}

/// One step of the standard blank coupling; identical moves once the
/// blanks agree. Returns the pair of moves made.
pub fn standard_blank_coupling<R: RngCore>(cs: &mut CoupledState, src: &mut MoveSource<R>) -> (Move, Move) {
    let ma = Move::from_lazy(src.lazy());
    let (dx, dy) = cs.b.blank.sub(cs.a.blank).signed();
    let mb = match (dx == 0, dy == 0) {
        (true, true) => ma,
        (true, false) => flip(ma, false, true),
        (false, true) => flip(ma, true, false),
        (false, false) => flip(ma, true, true),
    };
    cs.a.apply(ma);
    cs.b.apply(mb);
    (ma, mb)
}

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct CouplingOutcome {
    pub steps: u64,
    pub restarts: u32,
    pub coalesced: bool,
    /// Times a coinciding pair separated during stage 2; always 0.
    pub stage2_separations: u64,
    /// `move_counts[copy][stage][move]` when tracing is on.
    pub move_counts: Option<[[[u64; 5]; 4]; 2]>,
}

#[derive(Clone, Copy, Debug)]
pub struct CouplingConfig {
    pub stage_cap: u64,
    /// Give up (uncoalesced) after this many steps.
    pub max_steps: u64,
    pub trace: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { stage_cap: DEFAULT_STAGE_CAP, max_steps: u64::MAX, trace: false }
    }
}

fn midpoint(a: TorusPoint, b: TorusPoint) -> TorusPoint {
    // (a + b) * inv(2) mod n, n odd
    let inv2 = (a.n as i64 + 1) / 2;
    TorusPoint::new((a.x as i64 + b.x as i64) * inv2, (a.y as i64 + b.y as i64) * inv2, a.n)
}

fn close_pair(cs: &CoupledState) -> Option<usize> {
    (0..cs.a.pieces.len()).find(|&i| {
        let (p, q) = (cs.a.pieces[i], cs.b.pieces[i]);
        if p == q || p.linf(q) > 2 {
            return false;
        }
        let m = midpoint(p, q);
        m.linf(p) <= 2 && m.linf(q) <= 2
    })
}

fn move_slot(m: Move) -> usize {
    Move::ALL.iter().position(|&x| x == m).unwrap()
}

/// Runs the staged coupling to full coalescence (or `max_steps`).
pub fn full_coupling_run<R: RngCore>(mut cs: CoupledState, rng: R, cfg: CouplingConfig) -> Result<CouplingOutcome> {
    let n = cs.a.n;
    precondition(n >= 3, || format!("coupling needs n >= 3, got {n}"))?;
    precondition(n % 2 == 1, || format!("the coupling is built for odd n, got {n}"))?;
    let mut src = MoveSource::new(rng);
    let mut out = CouplingOutcome::default();
    let mut counts = [[[0u64; 5]; 4]; 2];
    let mut stage = Stage::BlankMeet;
    let mut target = 0usize;
    let mut stage_steps = 0u64;
    while !cs.coalesced() {
        if out.steps >= cfg.max_steps {
            break;
        }
        let before = if stage == Stage::Together { Some(cs.coalesced_pieces()) } else { None };
        let (ma, mb) = match stage {
            Stage::BlankMeet | Stage::Together => standard_blank_coupling(&mut cs, &mut src),
            Stage::Independent => {
                let ma = Move::from_lazy(src.lazy());
                let mb = Move::from_lazy(src.lazy());
                cs.a.apply(ma);
                cs.b.apply(mb);
                (ma, mb)
            }
            Stage::Opposed => {
                let ma = Move::from_lazy(src.lazy());
                let mb = ma.inverse();
                cs.a.apply(ma);
                cs.b.apply(mb);
                (ma, mb)
            }
        };
        out.steps += 1;
        stage_steps += 1;
        if cfg.trace {
            counts[0][stage.slot()][move_slot(ma)] += 1;
            counts[1][stage.slot()][move_slot(mb)] += 1;
        }
        if let Some(prev) = before {
            let now = cs.coalesced_pieces();
            out.stage2_separations += prev.iter().zip(&now).filter(|(p, q)| **p && !**q).count() as u64;
        }
        if cs.coalesced() {
            break;
        }
        let next = match stage {
            Stage::BlankMeet if cs.a.blank == cs.b.blank => Some(Stage::Together),
            Stage::Together => close_pair(&cs).map(|i| {
                target = i;
                Stage::Independent
            }),
            Stage::Independent => {
                let pair = midpoint(cs.a.pieces[target], cs.b.pieces[target]);
                if midpoint(cs.a.blank, cs.b.blank) == pair {
                    Some(Stage::Opposed)
                } else if stage_steps >= cfg.stage_cap {
                    out.restarts += 1;
                    Some(Stage::BlankMeet)
                } else {
                    None
                }
            }
            Stage::Opposed => {
                if cs.a.pieces[target] == cs.b.pieces[target] {
                    Some(Stage::BlankMeet)
                } else if stage_steps >= cfg.stage_cap {
                    out.restarts += 1;
                    Some(Stage::BlankMeet)
                } else {
                    None
                }
            }
            _ => None,
        };
        if let Some(s) = next {
            stage = if s == Stage::BlankMeet && cs.a.blank == cs.b.blank { Stage::Together } else { s };
            stage_steps = 0;
        }
    }
    out.coalesced = cs.coalesced();
    if cfg.trace {
        out.move_counts = Some(counts);
    }
    Ok(out)
}

/// Steps until the blanks first coincide under the standard coupling, from
/// independent uniform starts.
pub fn blank_meet_time(n: u32, seed: u64, trial: u64) -> Result<u64> {
    precondition(n >= 3 && n % 2 == 1, || format!("blank coupling needs odd n >= 3, got {n}"))?;
    let mut rng = trial_rng(seed, trial);
    let mut cs = CoupledState::sorted_vs_uniform(n, 0, &mut rng)?;
    cs.a.blank = TorusPoint::from_index((rng.next_u64() % (n * n) as u64) as usize, n);
    let mut src = MoveSource::new(rng);
    let mut steps = 0;
    while cs.a.blank != cs.b.blank {
        standard_blank_coupling(&mut cs, &mut src);
        steps += 1;
    }
    Ok(steps)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CouplingRun {
    pub n: u32,
    pub d: usize,
    pub seed: u64,
    pub run: u64,
    pub outcome: CouplingOutcome,
}

/// `runs` independent couplings, copy a sorted and copy b uniform; run `i`
/// uses stream `i` of `seed`.
pub fn coupling_runs(n: u32, d: usize, runs: u64, seed: u64, cfg: CouplingConfig) -> Result<Vec<CouplingRun>> {
    precondition(n % 2 == 1, || format!("the coupling is built for odd n, got {n}"))?;
    precondition(d < (n * n) as usize, || "too many pieces for the board".into())?;
    map_trials(runs, |i| {
        let mut rng = trial_rng(seed, i);
        let cs = CoupledState::sorted_vs_uniform(n, d, &mut rng)?;
        let outcome = full_coupling_run(cs, rng, cfg)?;
        Ok(CouplingRun { n, d, seed, run: i, outcome })
    })
    .into_iter()
    .collect()
}

pub fn write_runs_csv<W: Write>(runs: &[CouplingRun], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "d", "seed", "run", "coalescence_steps", "stage_restarts", "coalesced"])?;
    for r in runs {
        out.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.seed.to_string(),
            r.run.to_string(),
            r.outcome.steps.to_string(),
            r.outcome.restarts.to_string(),
            r.outcome.coalesced.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TvBound {
    pub t: u64,
    pub runs: u64,
    /// Empirical `P(tau_c > t)`.
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Wilson score interval at `z` standard errors.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Coupling bound on `TV(P^t(sorted, .), uniform start)`: `P(tau_c > t)`.
pub fn coupling_tv_bound(n: u32, d: usize, t: u64, runs: u64, seed: u64) -> Result<TvBound> {
    let cfg = CouplingConfig { max_steps: t, ..Default::default() };
    let all = coupling_runs(n, d, runs, seed, cfg)?;
    let late = all.iter().filter(|r| !r.outcome.coalesced).count() as u64;
    let (lo, hi) = wilson_interval(late, runs, 1.96);
    Ok(TvBound { t, runs, estimate: late as f64 / runs as f64, wilson_low: lo, wilson_high: hi })
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Both copies on the sorted start.
pub fn identical_sorted(n: u32, d: usize) -> Result<CoupledState> {
    let a = MarginalState::sorted(n, d);
    CoupledState::new(a.clone(), a)
}
