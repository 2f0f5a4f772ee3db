//! Deterministic virtual-time execution of an execution graph: operators
//! compute real outputs while a discrete-event clock accounts for compute,
//! batching and shaped inter-zone links.

mod cost;
mod engine;
mod network;
mod oracle;
mod report;
mod workload;

use thiserror::Error;

pub use cost::{CostModel, OperatorCost};
pub use engine::{AuditEntry, SimOutcome, Simulation};
pub use network::{Bandwidth, LinkSpec, NetworkCondition};
pub(crate) use network::ms_to_ns;
pub use oracle::oracle_run;
pub use report::{LinkStats, OperatorStats, QueueStats, SimReport, SinkOutput, SinkRecord, Snapshot};
pub use workload::{source_items, workload, MACHINES_PER_LOCATION};

use crate::dynamic::UpdateError;
use crate::planner::{ExecutionGraph, JobSpec, PlanError};
use crate::topology::ZoneTopology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("plan does not match topology: {0}")]
    Mismatch(String),
    #[error("invalid simulation parameters: {0}")]
    Config(String),
    #[error("virtual clock overflow")]
    ClockOverflow,
    #[error("simulation stalled: {0} never received end of stream")]
    Stalled(String),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Runs `plan` to quiescence.
pub fn simulate(
    plan: &ExecutionGraph,
    topology: &ZoneTopology,
    condition: &NetworkCondition,
    job: &JobSpec,
) -> Result<SimOutcome, SimError> {
    Simulation::new(plan, topology, condition, job)?.run()
}
