//! Deterministic discrete-event simulation of a MapReduce job.

mod engine;
pub mod partition;
mod trace;

pub use engine::{run_job, SlotPool};
pub use partition::partition_keys;
pub use trace::{
    EventKind, ExecutionTrace, FunctionRecord, PhaseBoundaries, TaskKind, TaskTimeline,
    TraceEvent,
};
