use crate::domain::SimTime;
use crate::sim::{EventKind, TraceEvent};

use super::JobView;

/// Lifecycle of one reduce task as seen by the master.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TaskClock {
    pub started: Option<SimTime>,
    /// Time of the last progress report (`p_i`).
    pub position: Option<SimTime>,
    pub finished: Option<SimTime>,
}

impl TaskClock {
    /// Applies task start/end events. Function ends are left to the caller,
    /// since what counts as a report differs between indicators.
    pub fn apply(&mut self, event: &TraceEvent) {
        match event.kind {
            EventKind::ReduceTaskStart => self.started = Some(event.t),
            EventKind::ReduceTaskEnd => self.finished = Some(event.t),
            _ => {}
        }
    }

    pub fn is_running(&self) -> bool {
        self.started.is_some() && self.finished.is_none()
    }
}

/// Predicted end of every reduce task.
///
/// Finished tasks keep their real end. Running tasks end at `p_i + r_i`,
/// where `p_i` defaults to the end of their fetch before the first report,
/// but never before `now`.
/// Tasks not yet scheduled go through a greedy FIFO mirror of the
/// scheduler: each takes the slot that frees up first, fetches its input
/// and then runs for its predicted remaining time.
pub fn project_ends(view: &JobView, clocks: &[TaskClock], remaining: &[f64], now: SimTime) -> Vec<f64> {
    let mut ends = vec![0.0; clocks.len()];
    let mut slots = Vec::with_capacity(view.parallelism);
    let mut pending = Vec::new();
    for (i, clock) in clocks.iter().enumerate() {
        if let Some(end) = clock.finished {
            ends[i] = end.as_f64();
        } else if let Some(start) = clock.started {
            let fetched = (start + view.fetch_ms(i)).max(view.reduce_start);
            let position = clock.position.map_or(fetched, |p| p.max(fetched));
            // still running, so it cannot end before now
            ends[i] = (position.as_f64() + remaining[i]).max(now.as_f64());
            slots.push(ends[i]);
        } else {
            pending.push(i);
        }
    }
    slots.resize(view.parallelism.max(slots.len()), now.as_f64());
    for i in pending {
        let (slot, free) = slots
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least one slot");
        let start = free.max(now.as_f64());
        ends[i] = start + view.fetch_ms(i) as f64 + remaining[i];
        slots[slot] = ends[i];
    }
    ends
}
