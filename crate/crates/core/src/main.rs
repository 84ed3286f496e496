use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use torus_puzzle::experiment_cli::{
    accept, exit_code, run, CsvSink, ExperimentConfig, ExperimentId, JsonSink, ResolvedConfig, RowSink, Suite,
};
use torus_puzzle::parallel::with_workers;
use torus_puzzle::{Error, Result};

#[derive(Parser)]
#[command(name = "puzzle-lab", version, about = "Experiments on the random sliding puzzle on the torus")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "PUZZLE_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    d: Option<usize>,
    /// Scaled time; chain steps are floor(c_puz n^4 t) (coupling: t n^4).
    #[arg(long)]
    t: Option<f64>,
    /// Explicit chain step count T.
    #[arg(long)]
    steps: Option<u64>,
    /// Jump range M of the product walk.
    #[arg(long)]
    range: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; `.json` selects JSON, anything else CSV. Default: stdout CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    detail_out: Option<PathBuf>,
    #[arg(long)]
    state_cap: Option<usize>,
    #[arg(long)]
    stage_cap: Option<u64>,
    /// Add a wall-time column (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// First-return direction frequencies, simulated and from the potential kernel.
    ReturnProbs(Common),
    /// Renewal moments of one marked piece and the fitted time constant.
    RenewalMoments(Common),
    /// Total variation of one piece's law against theta and uniform.
    SinglePieceTv(Common),
    /// Fixed-point counts against Poisson(1).
    FixedPoints(Common),
    /// Hitting and return times: exact generating function and simulation.
    Hitting(Common),
    /// Eigenvalue sums of the single-piece marginal chain.
    EigenSums(Common),
    /// Chi-square distance identity at small n.
    D2Identity(Common),
    /// Analytic and dense spectra of the range-M product walk.
    PdmSpectrum(Common),
    /// Dirichlet-form comparison of the symmetrized chain.
    Comparison(Common),
    /// Coalescence times of the coupled marginal chains.
    Coupling(Common),
    /// Heat-kernel weights and concentration validators.
    Appendix(Common),
    /// Run an experiment described by a flat TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance battery or the property suite.
    Accept {
        /// List criteria without running them.
        #[arg(long)]
        list: bool,
        #[arg(long, value_enum, default_value = "acceptance")]
        suite: SuiteArg,
        /// Run only these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare verdicts with the bundled fixture.
        #[arg(long)]
        check_fixture: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SuiteArg {
    Acceptance,
    Property,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Acceptance => Suite::Acceptance,
            SuiteArg::Property => Suite::Property,
        }
    }
}

fn to_config(id: ExperimentId, c: Common, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        experiment: id.as_str().to_string(),
        n: c.n,
        d: c.d,
        t: c.t,
        steps: c.steps,
        range: c.range,
        trials: c.trials,
        seed: c.seed,
        out: c.out,
        detail_out: c.detail_out,
        state_cap: c.state_cap,
        stage_cap: c.stage_cap,
        workers: Some(workers),
        timing: Some(c.timing),
    }
}

fn run_experiment(cfg: ExperimentConfig, default_workers: usize) -> Result<()> {
    let resolved = ResolvedConfig::resolve(&cfg)?;
    let workers = cfg.workers.unwrap_or(default_workers);
    let mut sink: Box<dyn RowSink + Send> = match &resolved.out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => Box::new(JsonSink::new(BufWriter::new(File::create(p)?))),
        Some(p) => Box::new(CsvSink::new(File::create(p)?, resolved.timing)),
        None => Box::new(CsvSink::new(io::stdout(), resolved.timing)),
    };
    with_workers(workers, || run(&resolved, sink.as_mut()))?;
    Ok(())
}

fn run_accept(suite: Suite, list: bool, only: Vec<u32>, out: Option<PathBuf>, check_fixture: bool) -> Result<()> {
    let infos = match suite {
        Suite::Acceptance => accept::criteria(),
        Suite::Property => accept::property_checks(),
    };
    let mut so = io::stdout().lock();
    if list {
        for c in &infos {
            writeln!(so, "{:>2}  {}  [seed {}]  {}", c.id, c.name, c.seed, c.tolerance)?;
        }
        return Ok(());
    }
    for id in &only {
        if !infos.iter().any(|c| c.id == *id) {
            return Err(Error::Config { field: "only".into(), reason: format!("no criterion {id}") });
        }
    }
    let mut results = Vec::new();
    for c in infos.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let r = accept::run_criterion(suite, c.id).expect("id from the table");
        writeln!(so, "{}", r.line())?;
        so.flush()?;
        results.push(r);
    }
    let passed = results.iter().filter(|r| r.pass).count();
    writeln!(so, "{passed}/{} passed", results.len())?;
    if check_fixture && suite == Suite::Acceptance {
        let bad = accept::fixture_mismatches(&results, &accept::bundled_verdicts());
        if bad.is_empty() {
            writeln!(so, "verdicts match the bundled fixture")?;
        } else {
            writeln!(so, "verdicts differ from the bundled fixture for {bad:?}")?;
        }
    }
    if let Some(p) = out {
        serde_json::to_writer_pretty(BufWriter::new(File::create(p)?), &results)?;
    }
    // statistical verdicts never change the exit status
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let w = cli.workers;
    let result = match cli.command {
        Command::ReturnProbs(c) => run_experiment(to_config(ExperimentId::ReturnProbs, c, w), w),
        Command::RenewalMoments(c) => run_experiment(to_config(ExperimentId::RenewalMoments, c, w), w),
        Command::SinglePieceTv(c) => run_experiment(to_config(ExperimentId::SinglePieceTv, c, w), w),
        Command::FixedPoints(c) => run_experiment(to_config(ExperimentId::FixedPoints, c, w), w),
        Command::Hitting(c) => run_experiment(to_config(ExperimentId::Hitting, c, w), w),
        Command::EigenSums(c) => run_experiment(to_config(ExperimentId::EigenSums, c, w), w),
        Command::D2Identity(c) => run_experiment(to_config(ExperimentId::D2Identity, c, w), w),
        Command::PdmSpectrum(c) => run_experiment(to_config(ExperimentId::PdmSpectrum, c, w), w),
        Command::Comparison(c) => run_experiment(to_config(ExperimentId::Comparison, c, w), w),
        Command::Coupling(c) => run_experiment(to_config(ExperimentId::Coupling, c, w), w),
        Command::Appendix(c) => run_experiment(to_config(ExperimentId::Appendix, c, w), w),
        Command::Run { config, out } => std::fs::read_to_string(&config)
            .map_err(Error::from)
            .and_then(|text| ExperimentConfig::from_toml(&text))
            .and_then(|mut cfg| {
                if out.is_some() {
                    cfg.out = out;
                }
                run_experiment(cfg, w)
            }),
        Command::Accept { list, suite, only, out, check_fixture } => run_accept(suite.into(), list, only, out, check_fixture),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
