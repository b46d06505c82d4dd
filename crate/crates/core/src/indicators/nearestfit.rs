use std::collections::BTreeMap;

use crate::domain::{NearestFitConfig, SimTime};
use crate::error::{Error, Result};
use crate::regression::{fit_power, select_global_fit, Combiner, FitModel, PointSet};
use crate::sim::{EventKind, TraceEvent};
use crate::sketch::{BurstFilter, Measurement, SizeHistogram, SmoothedPointSet};

use super::profiles::{KeyDistribution, SMOOTHED_POINT_BYTES};
use super::schedule::{project_ends, TaskClock};
use super::{JobView, ProfileBytes, ProgressIndicator};

/// Key-free profile event: a finished reduce function of `task`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReduceReport {
    pub task: usize,
    pub t: SimTime,
    pub size_bytes: u64,
    pub elapsed_ms: u64,
}

/// Master-side state of one reduce task. Holds sizes and times only.
#[derive(Clone, Debug)]
struct TaskState {
    /// `S_i`: unprocessed explicit sizes with multiplicity.
    explicit: BTreeMap<u64, u64>,
    /// `s_i`: unprocessed implicit bytes.
    implicit: u64,
    /// Smallest explicit size in the profile. Untracked keys are assumed
    /// no larger until the histogram has seen any.
    implicit_cap: Option<u64>,
    points: SmoothedPointSet,
    snapshot: PointSet,
    fit: Option<FitModel>,
    dirty: bool,
    burst: Option<BurstFilter>,
}

pub struct NearestFit {
    name: String,
    cfg: NearestFitConfig,
    view: JobView,
    tasks: Vec<TaskState>,
    clocks: Vec<TaskClock>,
    /// Sizes that went through the implicit path, across all tasks.
    histogram: SizeHistogram,
    global: PointSet,
    ends: Vec<f64>,
    estimate: Option<f64>,
    map_profile_bytes: u64,
}

impl NearestFit {
    pub fn new(
        name: &str,
        cfg: NearestFitConfig,
        view: JobView,
        profile: KeyDistribution,
    ) -> Result<Self> {
        cfg.validate()?;
        if profile.tasks.len() != view.reducers {
            return Err(Error::invalid("key distribution does not match reducer count"));
        }
        let tasks = profile
            .tasks
            .iter()
            .map(|t| {
                let mut explicit = BTreeMap::new();
                for &size in &t.explicit {
                    *explicit.entry(size).or_insert(0) += 1;
                }
                let implicit_cap = explicit.keys().next().copied().filter(|&s| s > 0);
                TaskState {
                    explicit,
                    implicit: t.implicit_bytes,
                    implicit_cap,
                    points: SmoothedPointSet::new(cfg.smoothing_window_ms),
                    snapshot: PointSet::default(),
                    fit: None,
                    dirty: false,
                    burst: cfg.bursting.then(|| {
                        BurstFilter::new(cfg.burst_size_threshold_bytes, cfg.burst_skip_threshold)
                    }),
                }
            })
            .collect();
        Ok(Self {
            name: name.to_string(),
            histogram: SizeHistogram::new(cfg.histogram_capacity)?,
            clocks: vec![TaskClock::default(); view.reducers],
            ends: vec![0.0; view.reducers],
            tasks,
            cfg,
            view,
            global: PointSet::default(),
            estimate: None,
            map_profile_bytes: profile.map_profile_bytes,
        })
    }

    /// Unprocessed explicit sizes of task `i`, ascending, with repeats.
    pub fn explicit_sizes(&self, i: usize) -> Vec<u64> {
        self.tasks[i]
            .explicit
            .iter()
            .flat_map(|(&s, &n)| std::iter::repeat_n(s, n as usize))
            .collect()
    }

    pub fn implicit_bytes(&self, i: usize) -> u64 {
        self.tasks[i].implicit
    }

    pub fn task_ends(&self) -> &[f64] {
        &self.ends
    }

    /// Processes one profile event: moves `p_i`, consumes the matching
    /// explicit size (or implicit bytes) and records the data point.
    pub fn on_reduce_report(&mut self, report: ReduceReport) {
        let clock = &mut self.clocks[report.task];
        clock.position = Some(clock.position.map_or(report.t, |p| p.max(report.t)));
        self.consume(report.task, Measurement {
            size_bytes: report.size_bytes,
            elapsed_ms: report.elapsed_ms,
        });
    }

    fn consume(&mut self, i: usize, m: Measurement) {
        let tolerance = self.cfg.match_tolerance;
        let task = &mut self.tasks[i];
        match closest_within(&task.explicit, m.size_bytes, tolerance) {
            Some(size) => {
                let n = task.explicit.get_mut(&size).expect("matched size present");
                *n -= 1;
                if *n == 0 {
                    task.explicit.remove(&size);
                }
            }
            None => {
                task.implicit = task.implicit.saturating_sub(m.size_bytes);
                self.histogram.observe(m.size_bytes);
            }
        }
        task.points.insert(m.size_bytes, m.elapsed_ms);
        task.dirty = true;
    }

    fn deliver(&mut self, i: usize, t: SimTime, measurements: Vec<Measurement>) {
        if measurements.is_empty() {
            return;
        }
        let clock = &mut self.clocks[i];
        clock.position = Some(clock.position.map_or(t, |p| p.max(t)));
        for m in measurements {
            self.consume(i, m);
        }
    }

    fn linear_rate(&self) -> Option<f64> {
        let bytes = self.global.total_bytes();
        (bytes > 0.0).then(|| self.global.total_time() / bytes)
    }

    fn fallback(&self, bytes: f64) -> f64 {
        match (self.linear_rate(), self.view.shuffle_rate) {
            (Some(rate), _) => bytes * rate,
            (None, Some(shuffle)) => bytes / shuffle,
            (None, None) => 0.0,
        }
    }

    /// Predicted remaining time `r_i` of task `i`.
    pub fn remaining(&self, i: usize) -> f64 {
        let task = &self.tasks[i];
        let fits: Vec<&FitModel> = self.tasks.iter().filter_map(|t| t.fit.as_ref()).collect();
        let combiner = Combiner {
            local: &task.snapshot,
            local_fit: task.fit.as_ref(),
            global_points: &self.global,
            global_fit: select_global_fit(&task.snapshot, fits.iter().copied()),
            policy: self.cfg.delta,
            r2_threshold: self.cfg.r2_threshold,
        };
        let predict = |x: f64| {
            combiner
                .predict(x)
                .map(|p| p.ms)
                .unwrap_or_else(|_| self.fallback(x))
        };
        let explicit: f64 = task
            .explicit
            .iter()
            .map(|(&size, &n)| n as f64 * predict(size as f64))
            .sum();
        let implicit = match self.histogram.partition(task.implicit as f64) {
            Ok(buckets) => buckets.iter().map(|&(size, n)| n * predict(size)).sum(),
            Err(_) => match task.implicit_cap {
                Some(cap) => task.implicit as f64 / cap as f64 * predict(cap as f64),
                None => self.fallback(task.implicit as f64),
            },
        };
        explicit + implicit
    }

    /// `e_i(t)` for task `i` as of the last `advance`.
    pub fn task_end(&self, i: usize) -> f64 {
        self.ends[i]
    }
}

/// Nearest key of `map` within `tolerance * x` of `x`; the lower one wins a tie.
fn closest_within(map: &BTreeMap<u64, u64>, x: u64, tolerance: f64) -> Option<u64> {
    let below = map.range(..=x).next_back().map(|(&s, _)| s);
    let above = map.range(x..).next().map(|(&s, _)| s);
    let best = match (below, above) {
        (Some(b), Some(a)) => Some(if x - b <= a - x { b } else { a }),
        (b, a) => b.or(a),
    }?;
    (best.abs_diff(x) as f64 <= tolerance * x as f64).then_some(best)
}

impl ProgressIndicator for NearestFit {
    fn name(&self) -> &str {
        &self.name
    }

    fn observe(&mut self, event: &TraceEvent) {
        let i = event.task as usize;
        match event.kind {
            EventKind::ReduceTaskStart => self.clocks[i].apply(event),
            EventKind::ReduceFunctionEnd => {
                let m = Measurement {
                    size_bytes: event.size_bytes,
                    elapsed_ms: event.elapsed_ms,
                };
                let delivered = match self.tasks[i].burst.as_mut() {
                    Some(filter) => filter.record(m.size_bytes, m.elapsed_ms),
                    None => vec![m],
                };
                self.deliver(i, event.t, delivered);
            }
            EventKind::ReduceTaskEnd => {
                let rest = self.tasks[i]
                    .burst
                    .as_mut()
                    .map(|f| f.flush())
                    .unwrap_or_default();
                self.deliver(i, event.t, rest);
                self.clocks[i].apply(event);
            }
            _ => {}
        }
    }

    fn advance(&mut self, t: SimTime) -> Result<()> {
        let mut changed = false;
        for task in self.tasks.iter_mut().filter(|t| t.dirty) {
            task.snapshot = task.points.snapshot();
            task.fit = fit_power(&task.snapshot);
            task.dirty = false;
            changed = true;
        }
        if changed {
            self.global = PointSet::union(self.tasks.iter().map(|t| &t.snapshot));
        }
        if self.global.total_time() <= 0.0 && self.view.shuffle_rate.is_none() {
            // nothing to extrapolate from yet
            self.estimate = None;
            return Ok(());
        }
        let remaining: Vec<f64> = (0..self.tasks.len())
            .map(|i| {
                if self.clocks[i].finished.is_some() {
                    0.0
                } else {
                    self.remaining(i)
                }
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

    fn profile_bytes(&self) -> ProfileBytes {
        ProfileBytes {
            map_profile_bytes: self.map_profile_bytes,
            reduce_profile_bytes: self
                .tasks
                .iter()
                .map(|t| t.points.len() as u64 * SMOOTHED_POINT_BYTES)
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::TaskKeySizes;
    use crate::regression::DeltaPolicy;

    fn view(tasks: usize, parallelism: usize) -> JobView {
        JobView {
            reducers: tasks,
            parallelism,
            map_end: SimTime(0),
            reduce_start: SimTime(0),
            shuffle_rate: None,
            task_bytes: vec![0; tasks],
        }
    }

    fn cfg() -> NearestFitConfig {
        NearestFitConfig {
            delta: DeltaPolicy::exact(),
            bursting: false,
            ..Default::default()
        }
    }

    fn indicator(tasks: Vec<TaskKeySizes>, parallelism: usize) -> NearestFit {
        let n = tasks.len();
        let profile = KeyDistribution {
            tasks,
            map_profile_bytes: 0,
        };
        NearestFit::new("nf", cfg(), view(n, parallelism), profile).unwrap()
    }

    fn sizes(explicit: &[u64], implicit: u64) -> TaskKeySizes {
        TaskKeySizes {
            explicit: explicit.to_vec(),
            implicit_bytes: implicit,
        }
    }

    fn report(task: usize, t: u64, size: u64, ms: u64) -> ReduceReport {
        ReduceReport {
            task,
            t: SimTime(t),
            size_bytes: size,
            elapsed_ms: ms,
        }
    }

    #[test]
    fn exact_neighbour_remaining() {
        let mut nf = indicator(vec![sizes(&[100, 100], 0)], 1);
        nf.on_reduce_report(report(0, 7, 100, 7));
        nf.advance(SimTime(7)).unwrap();
        assert_eq!(nf.remaining(0), 7.0);
    }

    #[test]
    fn implicit_bytes_use_histogram() {
        let mut nf = indicator(vec![sizes(&[], 60)], 1);
        // one implicit key of size 10 taking 2 ms leaves 50 bytes
        nf.on_reduce_report(report(0, 2, 10, 2));
        nf.advance(SimTime(2)).unwrap();
        assert_eq!(nf.implicit_bytes(0), 50);
        assert_eq!(nf.remaining(0), 10.0);
    }

    #[test]
    fn close_size_consumes_explicit_entry() {
        let mut nf = indicator(vec![sizes(&[100, 50], 0)], 1);
        nf.on_reduce_report(report(0, 1, 99, 1));
        assert_eq!(nf.explicit_sizes(0), vec![50]);
    }

    #[test]
    fn unmatched_size_takes_implicit_path() {
        let mut nf = indicator(vec![sizes(&[100], 5)], 1);
        nf.on_reduce_report(report(0, 1, 10, 1));
        assert_eq!(nf.explicit_sizes(0), vec![100]);
        assert_eq!(nf.implicit_bytes(0), 0);
    }

    #[test]
    fn matching_prefers_nearest() {
        let mut map = BTreeMap::new();
        map.insert(95, 1);
        map.insert(102, 1);
        assert_eq!(closest_within(&map, 100, 0.05), Some(102));
        assert_eq!(closest_within(&map, 120, 0.05), None);
        assert_eq!(closest_within(&BTreeMap::new(), 5, 0.5), None);
    }

    #[test]
    fn queued_task_follows_running_one() {
        // Task 0 runs on the only slot; task 1 waits. Both hold a size-10
        // key and one size-10 key has already taken 10 ms.
        let mut nf = indicator(vec![sizes(&[10, 10], 0), sizes(&[10], 0)], 1);
        nf.observe(&TraceEvent {
            t: SimTime(0),
            kind: EventKind::ReduceTaskStart,
            task: 0,
            key: None,
            size_bytes: 20,
            elapsed_ms: 0,
        });
        nf.on_reduce_report(report(0, 10, 10, 10));
        nf.advance(SimTime(10)).unwrap();
        assert_eq!(nf.task_end(0), 20.0);
        assert_eq!(nf.task_end(1), 30.0);
        assert_eq!(nf.estimated_end(), Some(30.0));
    }
}
