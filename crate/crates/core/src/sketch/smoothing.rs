use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::regression::{PointSet, ProfilePoint};

/// An aggregate of executions with one input size and similar times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothedPoint {
    pub size_bytes: u64,
    pub total_ms: u64,
    pub count: u64,
}

impl SmoothedPoint {
    pub fn mean_ms(&self) -> f64 {
        self.total_ms as f64 / self.count as f64
    }
}

/// Data points of past executions, merged when the input size is equal and
/// the running time is within `window_ms` of the existing point's mean.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SmoothedPointSet {
    window_ms: u64,
    by_size: BTreeMap<u64, Vec<SmoothedPoint>>,
    len: usize,
    observations: u64,
}

impl SmoothedPointSet {
    pub fn new(window_ms: u64) -> Self {
        Self {
            window_ms,
            ..Self::default()
        }
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    /// Number of retained (merged) points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of executions inserted so far.
    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn insert(&mut self, size_bytes: u64, time_ms: u64) {
        self.observations += 1;
        let bucket = self.by_size.entry(size_bytes).or_default();
        let window = self.window_ms as f64;
        let closest = bucket
            .iter_mut()
            .map(|p| ((time_ms as f64 - p.mean_ms()).abs(), p))
            .filter(|(gap, _)| *gap <= window)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match closest {
            Some((_, point)) => {
                point.total_ms += time_ms;
                point.count += 1;
            }
            None => {
                bucket.push(SmoothedPoint {
                    size_bytes,
                    total_ms: time_ms,
                    count: 1,
                });
                self.len += 1;
            }
        }
    }

    pub fn points(&self) -> impl Iterator<Item = &SmoothedPoint> {
        self.by_size.values().flatten()
    }

    pub fn total_ms(&self) -> u64 {
        self.points().map(|p| p.total_ms).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.points().map(|p| p.size_bytes * p.count).sum()
    }

    pub fn snapshot(&self) -> PointSet {
        PointSet::new(self.points().map(|p| ProfilePoint {
            size_bytes: p.size_bytes,
            time_ms: p.mean_ms(),
            count: p.count,
        }))
    }
}

pub fn smooth_insert(set: &mut SmoothedPointSet, point: (u64, u64)) {
    set.insert(point.0, point.1);
}
