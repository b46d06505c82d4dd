//! Progress of the map and shuffle phases. Both are modelled linearly.

use crate::domain::SimTime;
use crate::error::Result;
use crate::sim::{EventKind, ExecutionTrace, TraceEvent};

use super::schedule::{project_ends, TaskClock};
use super::{progress_from_end, JobView};

/// Map-phase indicator: a single ms-per-byte rate over all finished map
/// functions, with queued map tasks placed by the scheduler mirror.
pub struct MapPhase {
    view: JobView,
    clocks: Vec<TaskClock>,
    processed: Vec<u64>,
    bytes: u64,
    ms: u64,
    estimate: Option<f64>,
}

impl MapPhase {
    pub fn new(split_bytes: Vec<u64>, parallelism: usize) -> Self {
        let n = split_bytes.len();
        Self {
            view: JobView {
                reducers: n,
                parallelism,
                map_end: SimTime::ZERO,
                reduce_start: SimTime::ZERO,
                shuffle_rate: None,
                task_bytes: split_bytes,
            },
            clocks: vec![TaskClock::default(); n],
            processed: vec![0; n],
            bytes: 0,
            ms: 0,
            estimate: None,
        }
    }

    pub fn from_trace(trace: &ExecutionTrace) -> Self {
        let splits = trace.job.map_splits.iter().map(|s| s.bytes()).collect();
        Self::new(splits, trace.cluster.parallelism())
    }

    pub fn observe(&mut self, event: &TraceEvent) {
        let j = event.task as usize;
        let clock = &mut self.clocks[j];
        match event.kind {
            EventKind::MapTaskStart => clock.started = Some(event.t),
            EventKind::MapTaskEnd => clock.finished = Some(event.t),
            EventKind::MapFunctionEnd => {
                clock.position = Some(event.t);
                self.processed[j] += event.size_bytes;
                self.bytes += event.size_bytes;
                self.ms += event.elapsed_ms;
            }
            _ => {}
        }
    }

    pub fn advance(&mut self, t: SimTime) {
        if self.bytes == 0 {
            self.estimate = None;
            return;
        }
        let rate = self.ms as f64 / self.bytes as f64;
        let remaining: Vec<f64> = self
            .view
            .task_bytes
            .iter()
            .zip(&self.processed)
            .map(|(&total, &done)| total.saturating_sub(done) as f64 * rate)
            .collect();
        let ends = project_ends(&self.view, &self.clocks, &remaining, t);
        self.estimate = Some(ends.into_iter().fold(0.0, f64::max));
    }

    pub fn estimated_end(&self) -> Option<f64> {
        self.estimate
    }

    /// Elapsed share of the predicted map phase; 0 before any map output.
    pub fn progress_at(&self, t: SimTime) -> Result<f64> {
        progress_from_end(t, SimTime::ZERO, self.estimate.unwrap_or(f64::INFINITY))
    }
}

/// Share of shuffle bytes moved at `rate` bytes/ms since `start`.
pub fn shuffle_phase_progress(t: SimTime, start: SimTime, total_bytes: u64, rate: f64) -> f64 {
    if total_bytes == 0 {
        return 100.0;
    }
    let moved = ((t - start) as f64 * rate).min(total_bytes as f64);
    moved / total_bytes as f64 * 100.0
}
