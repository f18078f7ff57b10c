use energetics_core::agents::{Action, AgentMemory};
use energetics_core::engine::{DecideJob, Decider};
use energetics_core::ActorId;
use rayon::prelude::*;

/// Decides all agents on the rayon pool. Results keep job order, so runs
/// are identical to serial decisions.
#[derive(Clone, Copy, Debug, Default)]
pub struct RayonDecider;

impl Decider for RayonDecider {
    fn decide_all(&self, jobs: Vec<DecideJob<'_>>) -> Vec<(ActorId, Vec<Action>, AgentMemory)> {
        jobs.into_par_iter().map(DecideJob::run).collect()
    }
}
