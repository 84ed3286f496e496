//! Flat key-value experiment configs and their validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling_sim::DEFAULT_STAGE_CAP;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ExperimentId {
    ReturnProbs,
    RenewalMoments,
    SinglePieceTv,
    FixedPoints,
    Hitting,
    EigenSums,
    D2Identity,
    PdmSpectrum,
    Comparison,
    Coupling,
    Appendix,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        ExperimentId::ReturnProbs,
        ExperimentId::RenewalMoments,
        ExperimentId::SinglePieceTv,
        ExperimentId::FixedPoints,
        ExperimentId::Hitting,
        ExperimentId::EigenSums,
        ExperimentId::D2Identity,
        ExperimentId::PdmSpectrum,
        ExperimentId::Comparison,
        ExperimentId::Coupling,
        ExperimentId::Appendix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::ReturnProbs => "return-probs",
            ExperimentId::RenewalMoments => "renewal-moments",
            ExperimentId::SinglePieceTv => "single-piece-tv",
            ExperimentId::FixedPoints => "fixed-points",
            ExperimentId::Hitting => "hitting",
            ExperimentId::EigenSums => "eigen-sums",
            ExperimentId::D2Identity => "d2-identity",
            ExperimentId::PdmSpectrum => "pdm-spectrum",
            ExperimentId::Comparison => "comparison",
            ExperimentId::Coupling => "coupling",
            ExperimentId::Appendix => "appendix",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| Error::Config {
            field: "experiment".into(),
            reason: format!("unknown experiment id `{s}`"),
        })
    }
}

/// One experiment as written in a config file. Every field except
/// `experiment` is optional and falls back to a per-experiment default.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: Option<u32>,
    pub d: Option<usize>,
    /// Scaled time (`T = floor(c_puz n^4 t)`), or `T / n^4` for coupling.
    pub t: Option<f64>,
    /// Chain steps; overrides `t` where both make sense.
    pub steps: Option<u64>,
    /// Jump range `M` of the product walk.
    pub range: Option<u32>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Secondary output: per-run CSV, spectrum CSV or comparison JSON.
    pub detail_out: Option<PathBuf>,
    pub state_cap: Option<usize>,
    pub stage_cap: Option<u64>,
    pub workers: Option<usize>,
    pub timing: Option<bool>,
}

pub const CONFIG_KEYS: [&str; 14] = [
    "experiment", "n", "d", "t", "steps", "range", "trials", "seed", "out", "detail_out", "state_cap", "stage_cap",
    "workers", "timing",
];

impl ExperimentConfig {
    /// Parses a flat TOML document; unknown keys and nested tables are errors
    /// naming the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| Error::Config { field: "<document>".into(), reason: e.message().to_string() })?;
        for (key, value) in &table {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config { field: key.clone(), reason: "unknown key".into() });
            }
            if value.is_table() || value.is_array() {
                return Err(Error::Config { field: key.clone(), reason: "config must be flat".into() });
            }
        }
        if !table.contains_key("experiment") {
            return Err(Error::Config { field: "experiment".into(), reason: "missing".into() });
        }
        table.clone().try_into().map_err(|e: toml::de::Error| {
            // toml does not name the offending key, so find it by retrying one key at a time
            let field = table
                .iter()
                .find(|(k, v)| {
                    let mut probe = toml::Table::new();
                    probe.insert("experiment".into(), toml::Value::String(String::new()));
                    probe.insert(k.to_string(), (*v).clone());
                    probe.try_into::<ExperimentConfig>().is_err()
                })
                .map(|(k, _)| k.clone())
                .unwrap_or_else(|| "<document>".into());
            Error::Config { field, reason: e.message().to_string() }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

/// A config with defaults filled in and every precondition checked.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub id: ExperimentId,
    pub n: u32,
    pub d: usize,
    pub t: Option<f64>,
    pub steps: Option<u64>,
    pub range: u32,
    pub trials: u64,
    pub seed: u64,
    pub state_cap: usize,
    pub stage_cap: u64,
    pub timing: bool,
    pub out: Option<PathBuf>,
    pub detail_out: Option<PathBuf>,
}

fn pre(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    crate::error::precondition(ok, msg)
}

impl ResolvedConfig {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        use ExperimentId::*;
        let id: ExperimentId = cfg.experiment.parse()?;
        let (n, d, trials) = match id {
            ReturnProbs => (50, 0, 100_000),
            RenewalMoments => (40, 1, 100_000),
            SinglePieceTv => (20, 1, 100_000),
            FixedPoints => (8, 0, 10_000),
            Hitting => (8, 0, 1_000_000),
            EigenSums => (16, 0, 0),
            D2Identity => (3, 1, 0),
            PdmSpectrum => (5, 1, 0),
            Comparison => (4, 1, 200),
            Coupling => (7, 1, 200),
            Appendix => (0, 0, 100_000),
        };
        let r = Self {
            id,
            n: cfg.n.unwrap_or(n),
            d: cfg.d.unwrap_or(d),
            t: cfg.t,
            steps: cfg.steps,
            range: cfg.range.unwrap_or(1),
            trials: cfg.trials.unwrap_or(trials),
            seed: cfg.seed.unwrap_or(1),
            state_cap: cfg.state_cap.unwrap_or(crate::chains::DEFAULT_STATE_CAP),
            stage_cap: cfg.stage_cap.unwrap_or(DEFAULT_STAGE_CAP),
            timing: cfg.timing.unwrap_or(false),
            out: cfg.out.clone(),
            detail_out: cfg.detail_out.clone(),
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<()> {
        use ExperimentId::*;
        let n = self.n;
        if let Some(t) = self.t {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config { field: "t".into(), reason: format!("must be positive, got {t}") });
            }
        }
        match self.id {
            ReturnProbs => pre(n >= 3, || format!("return-probs needs n >= 3, got {n}"))?,
            RenewalMoments => {
                pre(n >= 4, || format!("renewal-moments needs n >= 4, got {n}"))?;
                pre(self.trials >= 1000, || "renewal-moments needs at least 1000 renewals".into())?;
            }
            SinglePieceTv => pre(n >= 3, || format!("single-piece-tv needs n >= 3, got {n}"))?,
            FixedPoints => pre(n >= 3 && self.trials >= 2, || "fixed-points needs n >= 3 and trials >= 2".into())?,
            Hitting => pre((3..=40).contains(&n), || format!("hitting needs 3 <= n <= 40, got {n}"))?,
            EigenSums => pre((3..=40).contains(&n), || format!("eigen-sums needs 3 <= n <= 40, got {n}"))?,
            D2Identity => pre(n >= 2 && self.d >= 1, || "d2-identity needs n >= 2 and d >= 1".into())?,
            PdmSpectrum => pre(2 * self.range < n, || format!("pdm-spectrum needs 2M < n (M = {}, n = {n})", self.range))?,
            Comparison => pre(n >= 3 && self.d >= 1, || "comparison needs n >= 3 and d >= 1".into())?,
            Coupling => {
                pre(n >= 3 && n % 2 == 1, || format!("coupling needs odd n >= 3, got {n}"))?;
                pre(self.d < (n * n) as usize, || "too many pieces".into())?;
            }
            Appendix => pre(self.trials >= 100, || "appendix needs at least 100 samples".into())?,
        }
        Ok(())
    }

    /// `key=value` pairs of the parameters that matter for this experiment.
    pub fn parameters(&self) -> String {
        use ExperimentId::*;
        let mut p = Vec::new();
        if self.id != Appendix {
            p.push(format!("n={}", self.n));
        }
        if matches!(self.id, D2Identity | PdmSpectrum | Comparison | Coupling) {
            p.push(format!("d={}", self.d));
        }
        if let Some(t) = self.t {
            p.push(format!("t={t}"));
        }
        if let Some(s) = self.steps {
            p.push(format!("steps={s}"));
        }
        if self.id == PdmSpectrum {
            p.push(format!("range={}", self.range));
        }
        if matches!(self.id, ReturnProbs | RenewalMoments | SinglePieceTv | FixedPoints | Hitting | Comparison | Coupling | Appendix) {
            p.push(format!("trials={}", self.trials));
        }
        if self.id == Coupling {
            p.push(format!("stage_cap={}", self.stage_cap));
        }
        p.join(";")
    }
}
