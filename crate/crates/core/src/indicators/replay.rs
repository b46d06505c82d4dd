use serde::{Deserialize, Serialize};

use crate::domain::SimTime;
use crate::error::{Error, Result};
use crate::sim::ExecutionTrace;

use super::ProgressIndicator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressPoint {
    pub t: SimTime,
    pub estimated: f64,
    pub optimal: f64,
}

impl ProgressPoint {
    pub fn error(&self) -> f64 {
        (self.estimated - self.optimal).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressSeries {
    pub indicator: String,
    pub points: Vec<ProgressPoint>,
}

impl ProgressSeries {
    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().map(ProgressPoint::error).collect()
    }
}

/// `t_start + m * interval` for every `m` that stays within the reduce phase.
pub fn prediction_times(trace: &ExecutionTrace, interval_ms: u64) -> Result<Vec<SimTime>> {
    if interval_ms == 0 {
        return Err(Error::invalid("update interval must be > 0"));
    }
    let (start, end) = (trace.reduce_start().0, trace.job_end().0);
    Ok((start..=end).step_by(interval_ms as usize).map(SimTime).collect())
}

/// Progress of an indicator that knows the exact end.
pub fn optimal_progress(trace: &ExecutionTrace, t: SimTime) -> f64 {
    let (start, end) = (trace.reduce_start(), trace.job_end());
    if end <= start || t <= start {
        return if t > start { 100.0 } else { 0.0 };
    }
    (t - start) as f64 / (end - start) as f64 * 100.0
}

/// Feeds the trace to every indicator in time order and queries each one
/// at every prediction time. An indicator only ever sees events stamped at
/// or before the query time.
pub fn replay_with_indicators(
    trace: &ExecutionTrace,
    indicators: &mut [Box<dyn ProgressIndicator>],
    interval_ms: u64,
) -> Result<Vec<ProgressSeries>> {
    let times = prediction_times(trace, interval_ms)?;
    let mut series: Vec<ProgressSeries> = indicators
        .iter()
        .map(|ind| ProgressSeries {
            indicator: ind.name().to_string(),
            points: Vec::with_capacity(times.len()),
        })
        .collect();
    let mut next = 0;
    for &t in &times {
        while next < trace.events.len() && trace.events[next].t <= t {
            for ind in indicators.iter_mut() {
                ind.observe(&trace.events[next]);
            }
            next += 1;
        }
        let optimal = optimal_progress(trace, t);
        for (ind, out) in indicators.iter_mut().zip(series.iter_mut()) {
            ind.advance(t)?;
            out.points.push(ProgressPoint {
                t,
                estimated: ind.progress_at(t)?,
                optimal,
            });
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{
        ClusterSpec, CostModel, IntermediateKey, JobSpec, KeyId, MapSplit, NearestFitConfig,
        Partitioner,
    };
    use crate::indicators::{build_indicator, IndicatorKind};
    use crate::sim::{run_job, TraceEvent};

    fn trace() -> ExecutionTrace {
        let spec = JobSpec {
            map_splits: vec![MapSplit { pairs: 1, bytes_per_pair: 1 }],
            map_cost: CostModel::polynomial(3.0, 1.0),
            reduce_cost: CostModel::polynomial(1.0, 1.0),
            intermediate_keys: (1..=20)
                .map(|h| IntermediateKey {
                    key: KeyId(h),
                    map_sizes: vec![100],
                    factors: None,
                })
                .collect(),
            reducers: 2,
            partitioner: Partitioner::Hash,
            shuffle_rate: None,
        };
        run_job(&spec, &ClusterSpec::new(1, 1), 0).unwrap()
    }

    #[test]
    fn oracle_series_is_optimal_progress() {
        let tr = trace();
        let mut inds = vec![build_indicator(IndicatorKind::Optimal, &tr, &NearestFitConfig::default()).unwrap()];
        let series = replay_with_indicators(&tr, &mut inds, 7).unwrap();
        let pts = &series[0].points;
        assert_eq!(pts[0].t, tr.reduce_start());
        assert_eq!(pts[0].estimated, 0.0);
        for p in pts {
            let want = (p.t - tr.reduce_start()) as f64 / (tr.job_end() - tr.reduce_start()) as f64 * 100.0;
            assert_eq!(p.estimated, want);
            assert_eq!(p.error(), 0.0);
        }
        let end = inds[0].progress_at(tr.job_end()).unwrap();
        assert_eq!(end, 100.0);
    }

    struct Spy {
        seen: SimTime,
        start: SimTime,
    }

    impl ProgressIndicator for Spy {
        fn name(&self) -> &str {
            "spy"
        }
        fn observe(&mut self, event: &TraceEvent) {
            self.seen = self.seen.max(event.t);
        }
        fn advance(&mut self, t: SimTime) -> Result<()> {
            if self.seen > t {
                return Err(Error::invalid("saw a future event"));
            }
            Ok(())
        }
        fn estimated_end(&self) -> Option<f64> {
            None
        }
        fn reduce_start(&self) -> SimTime {
            self.start
        }
    }

    #[test]
    fn indicators_never_see_the_future() {
        let tr = trace();
        let mut inds: Vec<Box<dyn ProgressIndicator>> = vec![Box::new(Spy {
            seen: SimTime::ZERO,
            start: tr.reduce_start(),
        })];
        assert!(replay_with_indicators(&tr, &mut inds, 3).is_ok());
    }

    #[test]
    fn every_indicator_is_exact_on_uniform_linear_work() {
        // Uniform keys and linear cost: every estimator embodies the truth
        // once the first function has finished.
        let tr = trace();
        let cfg = NearestFitConfig::default();
        let mut inds: Vec<_> = [IndicatorKind::NearestFit, IndicatorKind::JobRatio, IndicatorKind::TaskRatio]
            .iter()
            .map(|&k| build_indicator(k, &tr, &cfg).unwrap())
            .collect();
        let series = replay_with_indicators(&tr, &mut inds, 100).unwrap();
        for s in &series {
            for p in s.points.iter().skip(1) {
                assert!(p.error() < 1e-9, "{} at {:?}: {}", s.indicator, p.t, p.error());
            }
        }
    }
}
