//! Full acceptance battery. Runs without the libtest harness so the
//! per-criterion lines always reach the console.
//!
//! Verdicts are compared with the bundled fixture: a criterion that fails
//! reproducibly is reported as FAIL but only a change of verdict fails this
//! target.

use std::process::ExitCode;

use torus_puzzle::experiment_cli::accept::{bundled_verdicts, fixture_mismatches};
use torus_puzzle::experiment_cli::{run_suite, Suite};

fn main() -> ExitCode {
    println!("acceptance battery");
    let results = run_suite(Suite::Acceptance, |r| println!("{}", r.line()));
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria passed", results.len());

    println!("property suite");
    let props = run_suite(Suite::Property, |r| println!("{}", r.line()));
    let props_ok = props.iter().all(|r| r.pass);

    let bad = fixture_mismatches(&results, &bundled_verdicts());
    if !bad.is_empty() {
        println!("verdicts differ from the bundled fixture for criteria {bad:?}");
    }
    if bad.is_empty() && props_ok {
        println!("verdicts reproduce the bundled fixture");
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
