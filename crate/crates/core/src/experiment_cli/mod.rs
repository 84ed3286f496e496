//! Declarative experiment configs, result persistence and the acceptance
//! driver behind the `puzzle-lab` binary.

pub mod accept;
pub mod config;
pub mod output;
pub mod runner;

pub use accept::{criteria, property_checks, run_criterion, run_suite, CriterionInfo, CriterionResult, Suite, Verdict};
pub use config::{ExperimentConfig, ExperimentId, ResolvedConfig};
pub use output::{CsvSink, JsonSink, ResultRow, RowSink, VecSink, RESULT_SCHEMA};
pub use runner::run;

use crate::error::Error;

/// Process exit status for an error: 2 for configuration and I/O problems,
/// 3 for violated module preconditions.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Precondition(_) | Error::SizeCap { .. } | Error::Singular(_) | Error::NotConverged(_) | Error::MissingPath(_) => 3,
    }
}
