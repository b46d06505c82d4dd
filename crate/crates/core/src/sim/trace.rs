use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{ClusterSpec, JobSpec, KeyId, SimTime};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Map,
    Reduce,
}

/// One map-function (one input pair) or reduce-function (one key group) run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    /// Reduce: the group's key. Map: the pair index within the split.
    pub key: KeyId,
    pub size_bytes: u64,
    pub start: SimTime,
    pub end: SimTime,
}

impl FunctionRecord {
    pub fn elapsed(&self) -> u64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTimeline {
    pub task_id: u32,
    pub kind: TaskKind,
    pub worker: u32,
    pub slot: u32,
    /// When the task took its slot.
    pub start: SimTime,
    /// Map: end of the last map function. Reduce: when the first reduce
    /// function may start (after fetching and the phase barrier).
    pub work_start: SimTime,
    pub end: SimTime,
    pub input_bytes: u64,
    pub functions: Vec<FunctionRecord>,
}

impl TaskTimeline {
    pub fn busy_ms(&self) -> u64 {
        self.functions.iter().map(|f| f.elapsed()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    pub map_end: SimTime,
    /// End of shuffling and start of the reduce phase (`t_start`).
    pub reduce_start: SimTime,
    /// Exact job end `e`.
    pub job_end: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    MapTaskStart,
    MapFunctionEnd,
    MapTaskEnd,
    ReduceTaskStart,
    ReduceFunctionEnd,
    ReduceTaskEnd,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::MapTaskStart => "map_task_start",
            EventKind::MapFunctionEnd => "map_function_end",
            EventKind::MapTaskEnd => "map_task_end",
            EventKind::ReduceTaskStart => "reduce_task_start",
            EventKind::ReduceFunctionEnd => "reduce_function_end",
            EventKind::ReduceTaskEnd => "reduce_task_end",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: SimTime,
    pub kind: EventKind,
    pub task: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<KeyId>,
    pub size_bytes: u64,
    pub elapsed_ms: u64,
}

/// Ground-truth record of a simulated job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub job: JobSpec,
    pub cluster: ClusterSpec,
    pub seed: u64,
    /// Reduce task of each intermediate key, index-aligned with `job`.
    pub assignment: Vec<u32>,
    pub maps: Vec<TaskTimeline>,
    pub reduces: Vec<TaskTimeline>,
    pub phases: PhaseBoundaries,
    /// Time-ordered event stream.
    pub events: Vec<TraceEvent>,
}

impl ExecutionTrace {
    pub fn reduce_start(&self) -> SimTime {
        self.phases.reduce_start
    }

    pub fn job_end(&self) -> SimTime {
        self.phases.job_end
    }

    /// Shuffle bytes destined to each reduce task.
    pub fn reduce_input_bytes(&self) -> Vec<u64> {
        self.reduces.iter().map(|r| r.input_bytes).collect()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskTimeline> {
        self.maps.iter().chain(&self.reduces)
    }

    /// Event log with columns `kind,task,key,size,t_ms,elapsed_ms`; `key`
    /// is hex and empty for task-level events.
    pub fn write_events_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "task", "key", "size", "t_ms", "elapsed_ms"])?;
        for e in &self.events {
            w.write_record([
                e.kind.as_str().to_string(),
                e.task.to_string(),
                e.key.map(|k| k.to_string()).unwrap_or_default(),
                e.size_bytes.to_string(),
                e.t.0.to_string(),
                e.elapsed_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
