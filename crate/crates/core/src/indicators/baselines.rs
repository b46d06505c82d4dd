//! Reference indicators: the optimal oracle, Hadoop's byte-fraction
//! progress and the two ratio-based estimators.

use crate::domain::{NearestFitConfig, SimTime};
use crate::error::Result;
use crate::sim::{EventKind, TraceEvent};

use super::schedule::{project_ends, TaskClock};
use super::{JobView, ProgressIndicator};

/// Knows the true end of the job.
pub struct OracleIndicator {
    view: JobView,
    end: SimTime,
}

impl OracleIndicator {
    pub fn new(view: JobView, end: SimTime) -> Self {
        Self { view, end }
    }
}

impl ProgressIndicator for OracleIndicator {
    fn name(&self) -> &str {
        "Optimal"
    }

    fn observe(&mut self, _event: &TraceEvent) {}

    fn advance(&mut self, _t: SimTime) -> Result<()> {
        Ok(())
    }

    fn estimated_end(&self) -> Option<f64> {
        Some(self.end.as_f64())
    }

    fn reduce_start(&self) -> SimTime {
        self.view.reduce_start
    }
}

/// Mean over tasks of the fraction of assigned bytes already reduced;
/// finished tasks count as complete.
pub fn hadoop_progress(fractions: &[f64]) -> f64 {
    if fractions.is_empty() {
        return 0.0;
    }
    fractions.iter().map(|f| f.clamp(0.0, 1.0)).sum::<f64>() / fractions.len() as f64 * 100.0
}

pub struct Hadoop {
    view: JobView,
    processed: Vec<u64>,
    finished: Vec<bool>,
    progress: f64,
}

impl Hadoop {
    pub fn new(view: JobView) -> Self {
        let n = view.reducers;
        Self {
            view,
            processed: vec![0; n],
            finished: vec![false; n],
            progress: 0.0,
        }
    }

    fn fractions(&self) -> Vec<f64> {
        (0..self.processed.len())
            .map(|i| {
                if self.finished[i] {
                    1.0
                } else if self.view.task_bytes[i] == 0 {
                    0.0
                } else {
                    self.processed[i] as f64 / self.view.task_bytes[i] as f64
                }
            })
            .collect()
    }
}

impl ProgressIndicator for Hadoop {
    fn name(&self) -> &str {
        "Hadoop"
    }

    fn observe(&mut self, event: &TraceEvent) {
        let i = event.task as usize;
        match event.kind {
            EventKind::ReduceFunctionEnd => self.processed[i] += event.size_bytes,
            EventKind::ReduceTaskEnd => self.finished[i] = true,
            _ => {}
        }
    }

    fn advance(&mut self, _t: SimTime) -> Result<()> {
        self.progress = hadoop_progress(&self.fractions());
        Ok(())
    }

    /// Hadoop reports a percentage directly, not an end time.
    fn estimated_end(&self) -> Option<f64> {
        None
    }

    fn reduce_start(&self) -> SimTime {
        self.view.reduce_start
    }

    fn progress_at(&self, t: SimTime) -> Result<f64> {
        super::progress_from_end(t, self.view.reduce_start, f64::INFINITY)?;
        Ok(self.progress)
    }
}

/// Running mean of ms per byte, optionally EWMA-smoothed over the
/// increments seen between two updates.
#[derive(Clone, Copy, Debug, Default)]
struct RateTracker {
    bytes: u64,
    ms: u64,
    seen_bytes: u64,
    seen_ms: u64,
    smoothed: Option<f64>,
}

impl RateTracker {
    fn add(&mut self, bytes: u64, ms: u64) {
        self.bytes += bytes;
        self.ms += ms;
    }

    fn refresh(&mut self, ewma: Option<f64>) {
        let Some(alpha) = ewma else {
            return;
        };
        let db = self.bytes - self.seen_bytes;
        if db == 0 {
            return;
        }
        let step = (self.ms - self.seen_ms) as f64 / db as f64;
        self.smoothed = Some(match self.smoothed {
            Some(prev) => alpha * step + (1.0 - alpha) * prev,
            None => step,
        });
        self.seen_bytes = self.bytes;
        self.seen_ms = self.ms;
    }

    fn rate(&self) -> Option<f64> {
        if self.bytes == 0 {
            return None;
        }
        Some(self.smoothed.unwrap_or(self.ms as f64 / self.bytes as f64))
    }
}

/// JobRatio (one job-wide speed) or TaskRatio (a speed per warm task).
pub struct Ratio {
    name: &'static str,
    per_task: bool,
    ewma: Option<f64>,
    warmup: f64,
    view: JobView,
    clocks: Vec<TaskClock>,
    tasks: Vec<RateTracker>,
    job: RateTracker,
    ends: Vec<f64>,
    estimate: Option<f64>,
}

impl Ratio {
    fn build(name: &'static str, per_task: bool, view: JobView, cfg: &NearestFitConfig) -> Self {
        let n = view.reducers;
        Self {
            name,
            per_task,
            ewma: cfg.ewma_alpha,
            warmup: cfg.warmup_fraction,
            view,
            clocks: vec![TaskClock::default(); n],
            tasks: vec![RateTracker::default(); n],
            job: RateTracker::default(),
            ends: vec![0.0; n],
            estimate: None,
        }
    }

    pub fn job(view: JobView, cfg: &NearestFitConfig) -> Self {
        Self::build("JobRatio", false, view, cfg)
    }

    pub fn task(view: JobView, cfg: &NearestFitConfig) -> Self {
        Self::build("TaskRatio", true, view, cfg)
    }

    /// Speed used for task `i`: its own once it is warm, else the job's.
    fn rate_for(&self, i: usize, job_rate: f64) -> f64 {
        let own = &self.tasks[i];
        let warm = own.bytes > 0
            && own.bytes as f64 > self.warmup * self.view.task_bytes[i] as f64;
        if self.per_task && warm {
            own.rate().unwrap_or(job_rate)
        } else {
            job_rate
        }
    }

    pub fn task_ends(&self) -> &[f64] {
        &self.ends
    }
}

impl ProgressIndicator for Ratio {
    fn name(&self) -> &str {
        self.name
    }

    fn observe(&mut self, event: &TraceEvent) {
        let i = event.task as usize;
        match event.kind {
            EventKind::ReduceTaskStart | EventKind::ReduceTaskEnd => self.clocks[i].apply(event),
            EventKind::ReduceFunctionEnd => {
                self.clocks[i].position = Some(event.t);
                self.tasks[i].add(event.size_bytes, event.elapsed_ms);
                self.job.add(event.size_bytes, event.elapsed_ms);
            }
            _ => {}
        }
    }

    fn advance(&mut self, t: SimTime) -> Result<()> {
        self.job.refresh(self.ewma);
        for task in &mut self.tasks {
            task.refresh(self.ewma);
        }
        let Some(job_rate) = self.job.rate() else {
            self.estimate = None;
            return Ok(());
        };
        let remaining: Vec<f64> = (0..self.tasks.len())
            .map(|i| {
                let left = self.view.task_bytes[i].saturating_sub(self.tasks[i].bytes);
                left as f64 * self.rate_for(i, job_rate)
            })
            .collect();
        self.ends = project_ends(&self.view, &self.clocks, &remaining, t);
        self.estimate = Some(
            self.ends
                .iter()
                .copied()
                .fold(self.view.reduce_start.as_f64(), f64::max),
        );
        Ok(())
    }

    fn estimated_end(&self) -> Option<f64> {
        self.estimate
    }

    fn reduce_start(&self) -> SimTime {
        self.view.reduce_start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(task_bytes: Vec<u64>) -> JobView {
        JobView {
            reducers: task_bytes.len(),
            parallelism: task_bytes.len(),
            map_end: SimTime(0),
            reduce_start: SimTime(0),
            shuffle_rate: None,
            task_bytes,
        }
    }

    fn ev(kind: EventKind, task: u32, t: u64, size: u64, ms: u64) -> TraceEvent {
        TraceEvent {
            t: SimTime(t),
            kind,
            task,
            key: None,
            size_bytes: size,
            elapsed_ms: ms,
        }
    }

    #[test]
    fn hadoop_averages_fractions() {
        assert_eq!(hadoop_progress(&[1.0, 0.4]), 70.0);
        assert_eq!(hadoop_progress(&[0.0, 0.0]), 0.0);
        let mut straggler = vec![1.0; 9];
        straggler.push(0.5);
        assert!((hadoop_progress(&straggler) - 95.0).abs() < 1e-12);
    }

    #[test]
    fn hadoop_counts_finished_tasks_fully() {
        let mut h = Hadoop::new(view(vec![10, 10]));
        h.observe(&ev(EventKind::ReduceFunctionEnd, 0, 5, 4, 5));
        h.observe(&ev(EventKind::ReduceTaskEnd, 1, 5, 10, 5));
        h.advance(SimTime(5)).unwrap();
        assert!((h.progress_at(SimTime(5)).unwrap() - 70.0).abs() < 1e-12);
    }

    #[test]
    fn jobratio_remaining_time() {
        // 10 s over 100 bytes; 50 bytes left -> 5 s more.
        let mut r = Ratio::job(view(vec![150]), &NearestFitConfig::default());
        r.observe(&ev(EventKind::ReduceTaskStart, 0, 0, 150, 0));
        r.observe(&ev(EventKind::ReduceFunctionEnd, 0, 10_000, 100, 10_000));
        r.advance(SimTime(10_000)).unwrap();
        assert_eq!(r.estimated_end(), Some(15_000.0));
    }

    #[test]
    fn no_processed_bytes_means_zero_progress() {
        let mut r = Ratio::job(view(vec![10]), &NearestFitConfig::default());
        r.advance(SimTime(50)).unwrap();
        assert_eq!(r.progress_at(SimTime(50)).unwrap(), 0.0);
    }

    #[test]
    fn warm_task_uses_private_rate() {
        let cfg = NearestFitConfig::default();
        let mut r = Ratio::task(view(vec![20, 110]), &cfg);
        for task in 0..2 {
            r.observe(&ev(EventKind::ReduceTaskStart, task, 0, 0, 0));
        }
        // task 0: 10 bytes at 2 ms/byte; task 1: 100 bytes at 1 ms/byte
        r.observe(&ev(EventKind::ReduceFunctionEnd, 1, 100, 100, 100));
        r.observe(&ev(EventKind::ReduceFunctionEnd, 0, 100, 10, 20));
        r.advance(SimTime(100)).unwrap();
        assert_eq!(r.task_ends()[0], 100.0 + 20.0);
        assert_eq!(r.task_ends()[1], 100.0 + 10.0);
    }

    #[test]
    fn cold_task_falls_back_to_job_rate() {
        let cfg = NearestFitConfig {
            warmup_fraction: 0.5,
            ..Default::default()
        };
        let mut task = Ratio::task(view(vec![100, 100]), &cfg);
        let mut job = Ratio::job(view(vec![100, 100]), &cfg);
        for r in [&mut task, &mut job] {
            r.observe(&ev(EventKind::ReduceTaskStart, 0, 0, 0, 0));
            r.observe(&ev(EventKind::ReduceTaskStart, 1, 0, 0, 0));
            r.observe(&ev(EventKind::ReduceFunctionEnd, 0, 30, 10, 30));
            r.observe(&ev(EventKind::ReduceFunctionEnd, 1, 10, 10, 10));
            r.advance(SimTime(30)).unwrap();
        }
        assert_eq!(task.task_ends(), job.task_ends());
    }

    #[test]
    fn slower_task_drives_the_estimate() {
        let cfg = NearestFitConfig::default();
        let mut r = Ratio::task(view(vec![20, 20]), &cfg);
        r.observe(&ev(EventKind::ReduceTaskStart, 0, 0, 0, 0));
        r.observe(&ev(EventKind::ReduceTaskStart, 1, 0, 0, 0));
        r.observe(&ev(EventKind::ReduceFunctionEnd, 0, 10, 10, 10));
        r.observe(&ev(EventKind::ReduceFunctionEnd, 1, 30, 10, 30));
        r.advance(SimTime(30)).unwrap();
        assert_eq!(r.estimated_end(), Some(60.0));
    }

    #[test]
    fn ewma_tracks_recent_speed() {
        let cfg = NearestFitConfig {
            ewma_alpha: Some(0.5),
            ..Default::default()
        };
        let mut r = Ratio::job(view(vec![40]), &cfg);
        r.observe(&ev(EventKind::ReduceTaskStart, 0, 0, 0, 0));
        r.observe(&ev(EventKind::ReduceFunctionEnd, 0, 10, 10, 10));
        r.advance(SimTime(10)).unwrap();
        r.observe(&ev(EventKind::ReduceFunctionEnd, 0, 40, 10, 30));
        r.advance(SimTime(40)).unwrap();
        // smoothed rate 0.5 * 3 + 0.5 * 1 = 2 ms/byte over 20 bytes left
        assert_eq!(r.estimated_end(), Some(80.0));
    }
}
