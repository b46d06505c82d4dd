use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::indicators::{build_indicator, replay_with_indicators, ProgressIndicator, ProgressSeries};
use crate::sim::{run_job, ExecutionTrace};

use super::config::ExperimentConfig;
use super::metrics::{overhead, summarize, ErrorSummary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub indicator: String,
    pub avg_err: f64,
    pub max_err: f64,
    /// Profile bytes over shuffle bytes, in percent; 0 for indicators
    /// that ship no profiles.
    pub overhead: f64,
    pub map_profile_bytes: u64,
    pub reduce_profile_bytes: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub trace: ExecutionTrace,
    pub series: Vec<ProgressSeries>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn row(&self, indicator: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.indicator == indicator)
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<ExecutionTrace> {
    let (job, cluster) = cfg.build_job()?;
    run_job(&job, &cluster, cfg.seed)
}

/// Replays `trace` through the configured indicators and summarizes them.
pub fn evaluate(cfg: &ExperimentConfig, trace: ExecutionTrace) -> Result<ExperimentOutput> {
    let mut indicators: Vec<Box<dyn ProgressIndicator>> = cfg
        .indicators
        .iter()
        .map(|&k| build_indicator(k, &trace, &cfg.nearestfit))
        .collect::<Result<_>>()?;
    let series = replay_with_indicators(&trace, &mut indicators, cfg.nearestfit.update_interval_ms)?;
    let shuffle = trace.job.total_shuffle_bytes();
    let summary = series
        .iter()
        .zip(&indicators)
        .map(|(s, ind)| {
            let ErrorSummary { avg, max } = summarize(&s.errors())?;
            let bytes = ind.profile_bytes();
            let pct = if shuffle == 0 {
                0.0
            } else {
                overhead(bytes.map_profile_bytes, bytes.reduce_profile_bytes, shuffle)?.overhead_pct
            };
            Ok(SummaryRow {
                indicator: s.indicator.clone(),
                avg_err: avg,
                max_err: max,
                overhead: pct,
                map_profile_bytes: bytes.map_profile_bytes,
                reduce_profile_bytes: bytes.reduce_profile_bytes,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        trace,
        series,
        summary,
    })
}

/// Generate, simulate, replay and summarize.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let trace = simulate(cfg)?;
    evaluate(cfg, trace)
}

/// One experiment per sweep value (just one without a sweep), run on
/// separate threads. Results keep the order of the values.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<(Option<Value>, ExperimentOutput)>> {
    let Some(sweep) = &cfg.sweep else {
        return Ok(vec![(None, run_experiment(cfg)?)]);
    };
    let configs = sweep
        .values
        .iter()
        .map(|v| Ok((v.clone(), cfg.with_override(&sweep.field, v.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(v, c)| scope.spawn(move || run_experiment(c).map(|out| (Some(v.clone()), out))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}

/// Loads a configuration file and runs it.
pub fn run_experiment_file(path: &Path) -> Result<Vec<(Option<Value>, ExperimentOutput)>> {
    run_sweep(&ExperimentConfig::load(path)?)
}
