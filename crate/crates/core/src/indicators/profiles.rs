//! Map task profiles and the master's key distribution profile.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{KeyId, NearestFitConfig, ProfileMode};
use crate::error::{Error, Result};
use crate::sim::ExecutionTrace;
use crate::sketch::SpaceSaving;

/// Key hash plus byte count.
pub const EXPLICIT_ENTRY_BYTES: u64 = 16;
/// Key count plus byte count, one per reduce task in every map profile.
pub const IMPLICIT_AGGREGATE_BYTES: u64 = 16;
/// Size, total time and merge count of one smoothed point.
pub const SMOOTHED_POINT_BYTES: u64 = 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplicitAggregate {
    pub keys: u64,
    pub bytes: u64,
}

/// What one map task reports: its `lambda` largest keys individually and
/// the rest folded into one aggregate per reduce task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapTaskProfile {
    pub task: u32,
    pub explicit: Vec<(KeyId, u64)>,
    pub implicit: Vec<ImplicitAggregate>,
}

impl MapTaskProfile {
    pub fn size_bytes(&self) -> u64 {
        self.explicit.len() as u64 * EXPLICIT_ENTRY_BYTES
            + self.implicit.len() as u64 * IMPLICIT_AGGREGATE_BYTES
    }
}

fn task_of(trace: &ExecutionTrace) -> HashMap<KeyId, u32> {
    trace
        .job
        .intermediate_keys
        .iter()
        .zip(&trace.assignment)
        .map(|(k, &t)| (k.key, t))
        .collect()
}

pub fn build_map_profiles(trace: &ExecutionTrace, lambda: usize) -> Vec<MapTaskProfile> {
    let reducers = trace.reduces.len();
    (0..trace.job.map_tasks())
        .map(|j| {
            let mut entries: Vec<(KeyId, u64, u32)> = trace
                .job
                .intermediate_keys
                .iter()
                .zip(&trace.assignment)
                .filter(|(k, _)| k.map_sizes[j] > 0)
                .map(|(k, &t)| (k.key, k.map_sizes[j], t))
                .collect();
            entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut implicit = vec![ImplicitAggregate::default(); reducers];
            for &(_, bytes, task) in entries.iter().skip(lambda) {
                implicit[task as usize].keys += 1;
                implicit[task as usize].bytes += bytes;
            }
            entries.truncate(lambda);
            MapTaskProfile {
                task: j as u32,
                explicit: entries.into_iter().map(|(k, b, _)| (k, b)).collect(),
                implicit,
            }
        })
        .collect()
}

/// Sizes the master expects task `i` to process. Key identities are gone
/// at this point.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskKeySizes {
    /// Explicit key sizes, descending.
    pub explicit: Vec<u64>,
    /// Bytes of all keys not listed in `explicit`.
    pub implicit_bytes: u64,
}

impl TaskKeySizes {
    pub fn total_bytes(&self) -> u64 {
        self.explicit.iter().sum::<u64>() + self.implicit_bytes
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyDistribution {
    pub tasks: Vec<TaskKeySizes>,
    pub map_profile_bytes: u64,
}

impl KeyDistribution {
    pub fn from_trace(trace: &ExecutionTrace, cfg: &NearestFitConfig) -> Result<Self> {
        match cfg.mode {
            ProfileMode::Oracle => Ok(Self::exact(trace)),
            ProfileMode::Approximate => {
                let profiles = build_map_profiles(trace, cfg.lambda);
                Self::merge(&profiles, &task_of(trace), trace.reduces.len(), cfg.sketch_capacity())
            }
        }
    }

    /// Exact `|V_k|` for every key of every task.
    pub fn exact(trace: &ExecutionTrace) -> Self {
        let mut tasks = vec![TaskKeySizes::default(); trace.reduces.len()];
        let mut entries = 0u64;
        for (key, &task) in trace.job.intermediate_keys.iter().zip(&trace.assignment) {
            tasks[task as usize].explicit.push(key.size_bytes());
            entries += key.map_sizes.iter().filter(|&&b| b > 0).count() as u64;
        }
        for t in &mut tasks {
            t.explicit.sort_unstable_by(|a, b| b.cmp(a));
        }
        Self {
            tasks,
            map_profile_bytes: entries * EXPLICIT_ENTRY_BYTES,
        }
    }

    /// Master-side merge: explicit entries go through a Space Saving sketch
    /// of `capacity` keys and each surviving key contributes its guaranteed
    /// lower bound. Everything else is implicit, so bytes per task add up.
    pub fn merge(
        profiles: &[MapTaskProfile],
        task_of: &HashMap<KeyId, u32>,
        reducers: usize,
        capacity: usize,
    ) -> Result<Self> {
        let mut sketch = SpaceSaving::new(capacity)?;
        let mut totals = vec![0u64; reducers];
        let mut map_profile_bytes = 0;
        for profile in profiles {
            map_profile_bytes += profile.size_bytes();
            for &(key, bytes) in &profile.explicit {
                let task = *task_of
                    .get(&key)
                    .ok_or_else(|| Error::invalid(format!("key {key} has no reduce task")))?;
                totals[task as usize] += bytes;
                sketch.offer(key, bytes);
            }
            for (i, agg) in profile.implicit.iter().enumerate() {
                totals[i] += agg.bytes;
            }
        }
        let mut tasks = vec![TaskKeySizes::default(); reducers];
        for (key, counter) in sketch.iter() {
            let size = counter.lower_bound();
            if size > 0 {
                tasks[task_of[key] as usize].explicit.push(size);
            }
        }
        for (t, total) in tasks.iter_mut().zip(totals) {
            t.explicit.sort_unstable_by(|a, b| b.cmp(a));
            t.implicit_bytes = total.saturating_sub(t.explicit.iter().sum());
        }
        Ok(Self {
            tasks,
            map_profile_bytes,
        })
    }
}
