use serde::{Deserialize, Serialize};

use crate::domain::SimTime;
use crate::error::{Error, Result};
use crate::indicators::ProgressSeries;

/// Absolute gap, in percentage points, between the progress implied by an
/// estimated end and by the true end.
pub fn error_at(est_end: f64, true_end: f64, t: SimTime, t_start: SimTime) -> Result<f64> {
    let start = t_start.as_f64();
    if !(est_end > start && true_end > start) {
        return Err(Error::invalid(format!(
            "end times ({est_end}, {true_end}) must lie after phase start {start}"
        )));
    }
    let elapsed = t.as_f64() - start;
    Ok((elapsed / (est_end - start) - elapsed / (true_end - start)).abs() * 100.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub avg: f64,
    pub max: f64,
}

pub fn summarize(errors: &[f64]) -> Result<ErrorSummary> {
    if errors.is_empty() {
        return Err(Error::invalid("cannot summarize an empty error series"));
    }
    let sum: f64 = errors.iter().sum();
    let max = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ErrorSummary {
        avg: sum / errors.len() as f64,
        max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub indicator: String,
    pub series: Vec<(SimTime, f64)>,
    pub summary: ErrorSummary,
}

impl ErrorReport {
    pub fn from_series(series: &ProgressSeries) -> Result<Self> {
        let pts: Vec<(SimTime, f64)> = series.points.iter().map(|p| (p.t, p.error())).collect();
        let errors: Vec<f64> = pts.iter().map(|p| p.1).collect();
        Ok(Self {
            indicator: series.indicator.clone(),
            summary: summarize(&errors)?,
            series: pts,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub map_profile_bytes: u64,
    pub reduce_profile_bytes: u64,
    pub shuffle_bytes: u64,
    pub overhead_pct: f64,
}

/// Profile bytes relative to shuffle bytes, in percent.
pub fn overhead(map_profile_bytes: u64, reduce_profile_bytes: u64, shuffle_bytes: u64) -> Result<OverheadReport> {
    if shuffle_bytes == 0 {
        return Err(Error::invalid("overhead needs a non-empty shuffle"));
    }
    Ok(OverheadReport {
        map_profile_bytes,
        reduce_profile_bytes,
        shuffle_bytes,
        overhead_pct: (map_profile_bytes + reduce_profile_bytes) as f64 / shuffle_bytes as f64 * 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_formula() {
        assert_eq!(error_at(200.0, 100.0, SimTime(50), SimTime(0)).unwrap(), 25.0);
        assert_eq!(error_at(100.0, 100.0, SimTime(50), SimTime(0)).unwrap(), 0.0);
        assert_eq!(error_at(300.0, 100.0, SimTime(0), SimTime(0)).unwrap(), 0.0);
        assert!(error_at(0.0, 100.0, SimTime(5), SimTime(0)).is_err());
    }

    #[test]
    fn summaries() {
        assert_eq!(summarize(&[0.0, 10.0, 20.0]).unwrap(), ErrorSummary { avg: 10.0, max: 20.0 });
        assert_eq!(summarize(&[7.0]).unwrap(), ErrorSummary { avg: 7.0, max: 7.0 });
        assert_eq!(summarize(&[0.0; 4]).unwrap(), ErrorSummary { avg: 0.0, max: 0.0 });
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn overhead_formula() {
        let r = overhead(300, 100, 8000).unwrap();
        assert_eq!(r.overhead_pct, 5.0);
        assert!(overhead(1, 1, 0).is_err());
    }
}
