//! The `verify` subcommand: run the property suite and print a table.

use crate::error::{CliError, Result};
use ddorm_core::verify::{run_suite, CheckOutcome, Fault, VerifyOptions};
use std::io::Write;

/// Print one line per check and fail with the names of failing checks.
pub fn run_verify(options: &VerifyOptions, out: &mut impl Write) -> Result<Vec<CheckOutcome>> {
    if let Some(fault) = options.fault {
        let _ = writeln!(out, "injected fault: {fault:?}");
    }
    let outcomes = run_suite(options);
    for outcome in &outcomes {
        let _ = writeln!(out, "{outcome}");
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    let _ = writeln!(out, "{} of {} checks passed", outcomes.len() - failed.len(), outcomes.len());
    if failed.is_empty() {
        Ok(outcomes)
    } else {
        Err(CliError::CheckFailed(format!("failing checks: {}", failed.join(", "))))
    }
}

pub fn parse_fault(text: &str) -> Result<Fault> {
    text.parse().map_err(CliError::Config)
}
