//! Scenario-driven front end for `qtraj-core`.

pub mod builtin;
pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

use std::path::Path;

pub use commands::{Check, RunOutput};
pub use error::{CliError, Result};
pub use scenario::{Command, Job, Scenario};

/// Loads the scenario, runs `command` and writes every artifact plus the
/// manifest to `out`.
pub fn execute(command: Command, scenario: &str, seed: Option<u64>, out: &Path) -> Result<RunOutput> {
    let job = scenario::load_scenario(scenario)?.resolve(command, seed)?;
    let mut result = commands::run(&job)?;
    let manifest = output::manifest(command.name(), &job.scenario, job.rng_block(), &result.files)?;
    result.files.push(manifest);
    output::write_all(out, &result.files)?;
    Ok(result)
}
