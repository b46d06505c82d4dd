//! Running-time regression over `(input size, running time)` profile points.

mod combine;
mod fit;
mod neighbors;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use combine::{combined_predict, select_global_fit, Combiner, Prediction, Step};
pub use fit::{fit_power, FitModel};
pub use neighbors::nn_predict;

/// A past execution (or `count` merged executions) of mean time `time_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub size_bytes: u64,
    pub time_ms: f64,
    pub count: u64,
}

impl ProfilePoint {
    pub fn new(size_bytes: u64, time_ms: f64) -> Self {
        Self {
            size_bytes,
            time_ms,
            count: 1,
        }
    }

    pub fn weighted(size_bytes: u64, time_ms: f64, count: u64) -> Self {
        Self {
            size_bytes,
            time_ms,
            count,
        }
    }
}

/// Immutable snapshot of profile points, sorted by size, with prefix sums
/// over distinct sizes for range queries.
#[derive(Clone, Debug, Default)]
pub struct PointSet {
    points: Vec<ProfilePoint>,
    sizes: Vec<u64>,
    cum_count: Vec<f64>,
    cum_time: Vec<f64>,
}

impl PointSet {
    pub fn new(points: impl IntoIterator<Item = ProfilePoint>) -> Self {
        let mut points: Vec<ProfilePoint> = points.into_iter().filter(|p| p.count > 0).collect();
        points.sort_by(|a, b| {
            a.size_bytes
                .cmp(&b.size_bytes)
                .then(a.time_ms.total_cmp(&b.time_ms))
        });
        let mut sizes = Vec::new();
        let mut cum_count = vec![0.0];
        let mut cum_time = vec![0.0];
        for p in &points {
            let (n, t) = (p.count as f64, p.time_ms * p.count as f64);
            if sizes.last() == Some(&p.size_bytes) {
                *cum_count.last_mut().unwrap() += n;
                *cum_time.last_mut().unwrap() += t;
            } else {
                sizes.push(p.size_bytes);
                cum_count.push(cum_count.last().unwrap() + n);
                cum_time.push(cum_time.last().unwrap() + t);
            }
        }
        Self {
            points,
            sizes,
            cum_count,
            cum_time,
        }
    }

    pub fn from_pairs(pairs: &[(u64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(s, t)| ProfilePoint::new(s, t)))
    }

    pub fn union<'a>(sets: impl IntoIterator<Item = &'a PointSet>) -> Self {
        Self::new(sets.into_iter().flat_map(|s| s.points.iter().copied()))
    }

    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distinct_sizes(&self) -> usize {
        self.sizes.len()
    }

    /// Total executions represented.
    pub fn observations(&self) -> f64 {
        *self.cum_count.last().unwrap_or(&0.0)
    }

    pub fn total_time(&self) -> f64 {
        *self.cum_time.last().unwrap_or(&0.0)
    }

    pub fn total_bytes(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.size_bytes as f64 * p.count as f64)
            .sum()
    }

    /// Count-weighted mean time of points with size in `[lo, hi]`.
    pub(crate) fn range_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        if hi < lo || hi < 0.0 {
            return None;
        }
        let lo = lo.max(0.0).ceil();
        let hi = hi.floor();
        if hi < lo {
            return None;
        }
        let start = self.sizes.partition_point(|&s| (s as f64) < lo);
        let end = self.sizes.partition_point(|&s| (s as f64) <= hi);
        if start >= end {
            return None;
        }
        let n = self.cum_count[end] - self.cum_count[start];
        let t = self.cum_time[end] - self.cum_time[start];
        Some(t / n)
    }
}

/// Width of the nearest-neighbour window: `max(floor, fraction * x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaPolicy {
    pub floor_bytes: f64,
    pub fraction: f64,
}

impl DeltaPolicy {
    pub fn new(floor_bytes: f64, fraction: f64) -> Self {
        Self {
            floor_bytes,
            fraction,
        }
    }

    /// Exact-match neighbourhoods only.
    pub fn exact() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn width(&self, x: f64) -> f64 {
        self.floor_bytes.max(self.fraction * x)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor_bytes >= 0.0 && self.floor_bytes.is_finite()) {
            return Err(Error::field("nearestfit.delta.floor_bytes", "must be >= 0"));
        }
        if !(self.fraction >= 0.0 && self.fraction.is_finite()) {
            return Err(Error::field("nearestfit.delta.fraction", "must be >= 0"));
        }
        Ok(())
    }
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        Self::new(64.0, 0.05)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_mean_uses_counts() {
        let set = PointSet::new([
            ProfilePoint::weighted(10, 6.0, 3),
            ProfilePoint::new(11, 9.0),
            ProfilePoint::new(40, 100.0),
        ]);
        assert_eq!(set.distinct_sizes(), 3);
        assert_eq!(set.range_mean(9.5, 11.0), Some(6.75));
        assert_eq!(set.range_mean(12.0, 39.0), None);
        assert_eq!(set.observations(), 5.0);
    }

    #[test]
    fn delta_width() {
        let p = DeltaPolicy::default();
        assert_eq!(p.width(100.0), 64.0);
        assert_eq!(p.width(10_000.0), 500.0);
        assert_eq!(DeltaPolicy::exact().width(123.0), 0.0);
    }
}
