//! Reduce-phase progress indicators and the replay loop that drives them.

mod baselines;
mod nearestfit;
mod phases;
mod profiles;
mod replay;
mod schedule;

use serde::{Deserialize, Serialize};

use crate::domain::{NearestFitConfig, ProfileMode, SimTime};
use crate::error::{Error, Result};
use crate::sim::{ExecutionTrace, TraceEvent};

pub use baselines::{hadoop_progress, Hadoop, OracleIndicator, Ratio};
pub use nearestfit::{NearestFit, ReduceReport};
pub use phases::{shuffle_phase_progress, MapPhase};
pub use profiles::{
    build_map_profiles, KeyDistribution, MapTaskProfile, TaskKeySizes, EXPLICIT_ENTRY_BYTES,
    IMPLICIT_AGGREGATE_BYTES, SMOOTHED_POINT_BYTES,
};
pub use replay::{optimal_progress, prediction_times, replay_with_indicators, ProgressPoint, ProgressSeries};
pub use schedule::{project_ends, TaskClock};

/// What the job master knows about the reduce phase once it has started.
#[derive(Clone, Debug, PartialEq)]
pub struct JobView {
    pub reducers: usize,
    pub parallelism: usize,
    pub map_end: SimTime,
    pub reduce_start: SimTime,
    pub shuffle_rate: Option<f64>,
    /// Shuffle bytes destined to each reduce task.
    pub task_bytes: Vec<u64>,
}

impl JobView {
    pub fn from_trace(trace: &ExecutionTrace) -> Self {
        Self {
            reducers: trace.reduces.len(),
            parallelism: trace.cluster.parallelism(),
            map_end: trace.phases.map_end,
            reduce_start: trace.phases.reduce_start,
            shuffle_rate: trace.job.shuffle_rate,
            task_bytes: trace.reduce_input_bytes(),
        }
    }

    /// Fetch time for task `i`, computed like the simulator does.
    pub fn fetch_ms(&self, i: usize) -> u64 {
        match self.shuffle_rate {
            Some(rate) => (self.task_bytes[i] as f64 / rate).ceil() as u64,
            None => 0,
        }
    }
}

/// Profile sizes used by the space-overhead metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileBytes {
    pub map_profile_bytes: u64,
    pub reduce_profile_bytes: u64,
}

/// `(t - t_start) / (end - t_start) * 100`. A non-positive denominator is
/// clamped to one millisecond so the value stays defined.
pub fn progress_from_end(t: SimTime, t_start: SimTime, end: f64) -> Result<f64> {
    if t < t_start {
        return Err(Error::invalid(format!(
            "progress queried at {} ms, before phase start {} ms",
            t.0, t_start.0
        )));
    }
    let elapsed = (t.0 - t_start.0) as f64;
    if elapsed == 0.0 {
        return Ok(0.0);
    }
    let span = (end - t_start.as_f64()).max(1.0);
    Ok(elapsed / span * 100.0)
}

/// A reduce-phase progress indicator fed by the replay loop.
///
/// `observe` and `advance` are the only mutating calls; `progress_at` reads
/// the state left by the last `advance`.
pub trait ProgressIndicator {
    fn name(&self) -> &str;

    fn observe(&mut self, event: &TraceEvent);

    /// Refreshes estimates with everything observed up to `t`.
    fn advance(&mut self, t: SimTime) -> Result<()>;

    /// Predicted job end in ms, when the indicator works that way.
    fn estimated_end(&self) -> Option<f64>;

    fn reduce_start(&self) -> SimTime;

    fn progress_at(&self, t: SimTime) -> Result<f64> {
        match self.estimated_end() {
            Some(end) => progress_from_end(t, self.reduce_start(), end),
            None => {
                progress_from_end(t, self.reduce_start(), f64::INFINITY)
            }
        }
    }

    fn profile_bytes(&self) -> ProfileBytes {
        ProfileBytes::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    /// Knows the true job end; its error is zero by construction.
    Optimal,
    /// NearestFit with the profile mode from the configuration.
    NearestFit,
    /// NearestFit forced to exact per-key profiles.
    NearestFitExact,
    Hadoop,
    JobRatio,
    TaskRatio,
}

impl IndicatorKind {
    pub const PAPER_SET: [IndicatorKind; 4] = [
        IndicatorKind::NearestFit,
        IndicatorKind::Hadoop,
        IndicatorKind::JobRatio,
        IndicatorKind::TaskRatio,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            IndicatorKind::Optimal => "Optimal",
            IndicatorKind::NearestFit => "NearestFit",
            IndicatorKind::NearestFitExact => "NearestFit-exact",
            IndicatorKind::Hadoop => "Hadoop",
            IndicatorKind::JobRatio => "JobRatio",
            IndicatorKind::TaskRatio => "TaskRatio",
        }
    }
}

pub fn build_indicator(
    kind: IndicatorKind,
    trace: &ExecutionTrace,
    cfg: &NearestFitConfig,
) -> Result<Box<dyn ProgressIndicator>> {
    cfg.validate()?;
    let view = JobView::from_trace(trace);
    Ok(match kind {
        IndicatorKind::Optimal => Box::new(OracleIndicator::new(view, trace.job_end())),
        IndicatorKind::NearestFit | IndicatorKind::NearestFitExact => {
            let mut cfg = cfg.clone();
            if kind == IndicatorKind::NearestFitExact {
                cfg.mode = ProfileMode::Oracle;
            }
            let profile = KeyDistribution::from_trace(trace, &cfg)?;
            Box::new(NearestFit::new(kind.label(), cfg, view, profile)?)
        }
        IndicatorKind::Hadoop => Box::new(Hadoop::new(view)),
        IndicatorKind::JobRatio => Box::new(Ratio::job(view, cfg)),
        IndicatorKind::TaskRatio => Box::new(Ratio::task(view, cfg)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_formula() {
        let p = progress_from_end(SimTime(30), SimTime(0), 120.0).unwrap();
        assert_eq!(p, 25.0);
        assert!(progress_from_end(SimTime(5), SimTime(10), 20.0).is_err());
        assert_eq!(progress_from_end(SimTime(10), SimTime(10), 20.0).unwrap(), 0.0);
    }

    #[test]
    fn progress_may_exceed_hundred() {
        let p = progress_from_end(SimTime(150), SimTime(0), 100.0).unwrap();
        assert_eq!(p, 150.0);
    }
}
