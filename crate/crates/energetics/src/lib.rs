//! File formats, reports, policy comparisons and the command line for the
//! energetics simulator.

pub mod audit;
pub mod compare;
pub mod parallel;
pub mod report;
pub mod scenario_file;

pub use compare::{compare_runs, CompareError, Comparison};
pub use parallel::RayonDecider;
pub use report::{emit_report, Summary};
pub use scenario_file::{canonical_toml, load_scenario, parse_scenario, LoadError};

use energetics_core::{new_world, EngineAbort, RunReport, Scenario, ScenarioError};

/// Builds the world for `scenario` with optional seed and horizon
/// overrides and runs it in parallel.
pub fn run_scenario(mut scenario: Scenario, seed: Option<u64>, weeks: Option<u32>) -> Result<RunReport, RunError> {
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(w) = weeks {
        scenario.weeks = w;
    }
    let mut world = new_world(&scenario)?;
    let report = energetics_core::engine::run_with(&mut world, scenario.weeks, &RayonDecider)?;
    Ok(report)
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Abort(#[from] EngineAbort),
}
