//! Executes one resolved experiment, streaming rows into a sink.

use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use super::config::{ExperimentId, ResolvedConfig};
use super::output::{ResultRow, RowSink, RESULT_SCHEMA};
use crate::chains::{build_matrix, ChainSpec, MarginalState};
use crate::coupling_sim::{coupling_runs, coupling_tv_bound, write_runs_csv, CouplingConfig};
use crate::error::Result;
use crate::renewal_lab::{
    fixed_point_experiment, plugin_tv_floor, renewal_moments, scaled_steps, single_piece_law, track_renewals,
    Estimate, RenewalConstants, C_PUZ,
};
use crate::rng::trial_rng;
use crate::spectral_lab::{
    compare_symmetrized, d2_identity_check, eigen_sums, expected_hitting_time, expected_hitting_time_complex_step,
    hitting_char_at, mc_hitting_time, mc_return_time, pdm_spectral_sum, pdm_spectrum, ResolventModel,
    SpectrumSummary,
};
use crate::stat_appendix::concentration_validators;
use crate::torus_core::{first_return_counts, return_probabilities, PotentialTable, ThetaEvaluator};

/// Replicates used to calibrate the plug-in TV noise floor.
const FLOOR_REPLICATES: u64 = 20;

struct Emitter<'a> {
    cfg: &'a ResolvedConfig,
    params: String,
    start: Instant,
    sink: &'a mut dyn RowSink,
}

impl Emitter<'_> {
    fn row(&mut self, statistic: &str, value: f64, stderr: Option<f64>) -> Result<()> {
        self.sink.push(ResultRow {
            schema: RESULT_SCHEMA,
            experiment: self.cfg.id.as_str().to_string(),
            parameters: self.params.clone(),
            statistic: statistic.to_string(),
            value,
            stderr,
            seed: self.cfg.seed,
            wall_time: self.cfg.timing.then(|| self.start.elapsed().as_secs_f64()),
        })
    }

    fn est(&mut self, statistic: &str, e: Estimate) -> Result<()> {
        self.row(statistic, e.value, Some(e.se))
    }
}

/// Runs `cfg` and returns the nested report (if the experiment has one).
/// Everything written is a function of the config alone unless timing is on.
pub fn run(cfg: &ResolvedConfig, sink: &mut dyn RowSink) -> Result<Option<serde_json::Value>> {
    let mut em = Emitter { cfg, params: cfg.parameters(), start: Instant::now(), sink };
    let report = dispatch(cfg, &mut em)?;
    em.sink.finish(report.as_ref())?;
    Ok(report)
}

fn dispatch(cfg: &ResolvedConfig, em: &mut Emitter<'_>) -> Result<Option<serde_json::Value>> {
    let n = cfg.n;
    let nf = n as f64;
    match cfg.id {
        ExperimentId::ReturnProbs => {
            let g = return_probabilities(&PotentialTable::new(n)?);
            em.row("green_same", g.same, None)?;
            em.row("green_opposite", g.opposite, None)?;
            em.row("green_vertical", g.vertical, None)?;
            if cfg.trials > 0 {
                let c = first_return_counts(n, cfg.trials, cfg.seed)?;
                let total = c.iter().sum::<u64>() as f64;
                // vertical pools both sides, so halve it
                let freqs = [c[0] as f64 / total, c[1] as f64 / total, c[2] as f64 / (2.0 * total)];
                for (name, f) in ["mc_same", "mc_opposite", "mc_vertical"].into_iter().zip(freqs) {
                    em.row(name, f, Some((f * (1.0 - f) / total).sqrt()))?;
                }
            }
            Ok(None)
        }
        ExperimentId::RenewalMoments => {
            let rec = track_renewals(n, cfg.trials as usize, trial_rng(cfg.seed, 0))?;
            let m = renewal_moments(&rec)?;
            let theory = RenewalConstants::from_returns(&return_probabilities(&PotentialTable::new(n)?), Some(n));
            em.est("s2", m.s2)?;
            em.est("mu_over_n2", m.mu_over_n2(n))?;
            em.est("v2", m.v2)?;
            em.est("c_puz_hat", m.c_puz_hat)?;
            em.est("mean_h", m.mean_h)?;
            em.est("mean_m", m.mean_m)?;
            em.row("theory_s2", theory.s2, None)?;
            em.row("theory_mu_over_n2", theory.mu_over_n2, None)?;
            em.row("theory_c_puz", theory.c_puz, None)?;
            em.row("c_puz", C_PUZ, None)?;
            Ok(Some(serde_json::to_value(m)?))
        }
        ExperimentId::SinglePieceTv => {
            let (t, steps) = time_and_steps(cfg, 0.1);
            let law = ThetaEvaluator::new(t)?.grid_law(n);
            let emp = single_piece_law(n, steps, cfg.trials, cfg.seed)?;
            let tv = emp.tv_to(&law);
            let floor = plugin_tv_floor(&law, cfg.trials, FLOOR_REPLICATES, cfg.seed ^ 0x5eed);
            let uniform = vec![1.0 / (nf * nf); (n * n) as usize];
            let tv_u = emp.tv_to(&uniform);
            let floor_u = plugin_tv_floor(&uniform, cfg.trials, FLOOR_REPLICATES, cfg.seed ^ 0x5eed);
            em.row("steps", steps as f64, None)?;
            em.row("tv_theta", tv, None)?;
            em.est("tv_theta_floor", floor)?;
            em.row("tv_theta_excess", tv - floor.value, Some(floor.se))?;
            em.row("tv_uniform", tv_u, None)?;
            em.est("tv_uniform_floor", floor_u)?;
            em.row("tv_uniform_excess", tv_u - floor_u.value, Some(floor_u.se))?;
            em.row("theta_law_uniform_tv", crate::renewal_lab::total_variation(&law, &uniform), None)?;
            Ok(None)
        }
        ExperimentId::FixedPoints => {
            let (t, steps) = match (cfg.steps, cfg.t) {
                (Some(s), _) => (None, s),
                (None, Some(t)) => (Some(t), scaled_steps(n, t)),
                (None, None) => (None, 20 * (n as u64).pow(4)),
            };
            let r = fixed_point_experiment(n, steps, cfg.trials, cfg.seed)?;
            em.row("steps", steps as f64, None)?;
            em.est("mean", r.mean)?;
            for (d, e) in r.e_d.iter().enumerate() {
                em.est(&format!("e_{}", d + 1), *e)?;
            }
            em.row("tv_poisson", r.tv_poisson, None)?;
            if let Some(t) = t {
                em.row("theta_at_origin", ThetaEvaluator::new(t)?.eval(0.0, 0.0), None)?;
            }
            Ok(Some(serde_json::to_value(r)?))
        }
        ExperimentId::Hitting => {
            let model = ResolventModel::new(n)?;
            let chi = hitting_char_at(&model, num_complex::Complex64::new(1.0, 0.0))?;
            em.row("chi_at_one_re", chi.re, None)?;
            em.row("chi_at_one_im", chi.im, None)?;
            em.row("expected_hitting", expected_hitting_time(&model)?, None)?;
            em.row("expected_hitting_complex_step", expected_hitting_time_complex_step(&model)?, None)?;
            em.row("exact_return", 1.25 * nf * nf, None)?;
            if cfg.trials >= 2 {
                em.est("mc_hitting", mc_hitting_time(n, cfg.trials, cfg.seed)?)?;
                em.est("mc_return", mc_return_time(n, cfg.trials, cfg.seed ^ 0x7e7)?)?;
            }
            Ok(None)
        }
        ExperimentId::EigenSums => {
            let summary = SpectrumSummary::of(&ResolventModel::new(n)?);
            let s = eigen_sums(&summary);
            em.row("s1", s.s1, None)?;
            em.row("s2", s.s2, None)?;
            em.row("s2_over_n2", s.s2 / (nf * nf), None)?;
            em.row("overlap_mass", s.overlap_mass, None)?;
            em.row("lambda_max", s.lambda_max, None)?;
            em.row("lambda_min", s.lambda_min, None)?;
            if let Some(path) = &cfg.detail_out {
                summary.write_csv(BufWriter::new(File::create(path)?))?;
            }
            Ok(None)
        }
        ExperimentId::D2Identity => {
            let chain = build_matrix(ChainSpec::Marginal { d: cfg.d }, n, cfg.state_cap)?;
            let start = chain
                .index_of(&MarginalState::sorted(n, cfg.d).encode())
                .ok_or_else(|| crate::Error::Precondition("sorted start missing from the state space".into()))?;
            let steps: Vec<u32> = match cfg.steps {
                Some(s) => vec![s as u32],
                None => vec![0, 1, 5, 20],
            };
            let mut checks = Vec::new();
            for s in steps {
                let c = d2_identity_check(&chain, start, s)?;
                em.row(&format!("lhs_n{s}"), c.lhs, None)?;
                em.row(&format!("rhs_n{s}"), c.rhs, None)?;
                em.row(&format!("lhs_average_n{s}"), c.lhs_average, None)?;
                em.row(&format!("tv_n{s}"), c.tv, None)?;
                checks.push(c);
            }
            Ok(Some(serde_json::to_value(checks)?))
        }
        ExperimentId::PdmSpectrum => {
            let analytic = pdm_spectrum(n, cfg.d, cfg.range, cfg.state_cap)?;
            let brute = build_matrix(ChainSpec::ProductWalk { d: cfg.d, range: cfg.range }, n, cfg.state_cap)?.eigenvalues()?;
            let diff = analytic.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            em.row("states", analytic.len() as f64, None)?;
            em.row("max_eigen_diff", diff, None)?;
            for c in [1.0, 5.0, 10.0, 25.0, 50.0] {
                em.row(&format!("spectral_sum_c{c}"), pdm_spectral_sum(&analytic, n, cfg.range, c), None)?;
            }
            Ok(None)
        }
        ExperimentId::Comparison => {
            let r = compare_symmetrized(n, cfg.d, cfg.state_cap, cfg.trials as usize, cfg.seed)?;
            em.row("states", r.states as f64, None)?;
            em.row("symmetrized_states", r.symmetrized_states as f64, None)?;
            em.row("rho", r.rho, None)?;
            em.row("a_total", r.a_total, None)?;
            em.row("max_path_len", r.max_path_len as f64, None)?;
            em.row("sampled_ratio", r.sampled_ratio, None)?;
            em.row("b_measured", r.b_measured, None)?;
            em.row("b_bound", r.b_bound, None)?;
            let v = serde_json::to_value(&r)?;
            if let Some(path) = &cfg.detail_out {
                serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &v)?;
            }
            Ok(Some(v))
        }
        ExperimentId::Coupling => {
            let cc = CouplingConfig { stage_cap: cfg.stage_cap, ..Default::default() };
            let runs = coupling_runs(n, cfg.d, cfg.trials, cfg.seed, cc)?;
            let steps: Vec<f64> = runs.iter().map(|r| r.outcome.steps as f64).collect();
            em.est("coalescence_steps", crate::renewal_lab::mean_estimate(&steps))?;
            let restarts: Vec<f64> = runs.iter().map(|r| r.outcome.restarts as f64).collect();
            em.est("stage_restarts", crate::renewal_lab::mean_estimate(&restarts))?;
            let done = runs.iter().filter(|r| r.outcome.coalesced).count();
            em.row("coalesced_fraction", done as f64 / runs.len().max(1) as f64, None)?;
            let sep: u64 = runs.iter().map(|r| r.outcome.stage2_separations).sum();
            em.row("stage2_separations", sep as f64, None)?;
            if let Some(path) = &cfg.detail_out {
                write_runs_csv(&runs, BufWriter::new(File::create(path)?))?;
            }
            if let Some(t) = cfg.t {
                let steps = (t * nf.powi(4)).floor() as u64;
                let b = coupling_tv_bound(n, cfg.d, steps, cfg.trials, cfg.seed)?;
                em.row("tv_bound_steps", steps as f64, None)?;
                em.row("tv_bound", b.estimate, None)?;
                em.row("tv_bound_wilson_high", b.wilson_high, None)?;
            }
            Ok(None)
        }
        ExperimentId::Appendix => {
            let r = concentration_validators(cfg.seed, cfg.trials)?;
            em.row("violations", r.violations().len() as f64, None)?;
            for (t, total) in r.omega.t.iter().zip(&r.omega.total) {
                em.row(&format!("omega_total_t{t}"), *total, None)?;
            }
            for (t, c) in r.omega.t.iter().zip(&r.omega.sup_constant) {
                em.row(&format!("omega_sup_constant_t{t}"), *c, None)?;
            }
            em.row("omega_sup_constant_spread", r.omega.sup_constant_spread(), None)?;
            em.row("omega_tail_rate", r.omega.tail_rate, None)?;
            Ok(Some(serde_json::to_value(&r)?))
        }
    }
}

/// Scaled time and step count: explicit steps win, otherwise `t` (or the
/// default) is converted with `c_puz n^4`.
fn time_and_steps(cfg: &ResolvedConfig, default_t: f64) -> (f64, u64) {
    match (cfg.steps, cfg.t) {
        (Some(s), Some(t)) => (t, s),
        (Some(s), None) => (s as f64 / (C_PUZ * (cfg.n as f64).powi(4)), s),
        (None, t) => {
            let t = t.unwrap_or(default_t);
            (t, scaled_steps(cfg.n, t))
        }
    }
}
