//! Weighted Space Saving: a bounded summary of the heaviest items of a
//! stream. Every tracked item satisfies
//! `true <= estimate <= true + total_weight / capacity`.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub estimate: u64,
    /// Maximum overestimation inherited from an evicted entry.
    pub error: u64,
}

impl Counter {
    /// Guaranteed lower bound on the true weight.
    pub fn lower_bound(&self) -> u64 {
        self.estimate - self.error
    }
}

#[derive(Clone, Debug)]
pub struct SpaceSaving<K> {
    capacity: usize,
    counters: HashMap<K, Counter>,
    // (estimate, key) ordered so the first element is the eviction victim.
    order: BTreeSet<(u64, K)>,
    total: u64,
}

impl<K> SpaceSaving<K>
where
    K: Copy + Ord + Hash,
{
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("space saving capacity must be >= 1"));
        }
        Ok(Self {
            capacity,
            counters: HashMap::with_capacity(capacity.min(1 << 16)),
            order: BTreeSet::new(),
            total: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    /// Sum of all offered weights.
    pub fn total_weight(&self) -> u64 {
        self.total
    }

    pub fn get(&self, key: &K) -> Option<Counter> {
        self.counters.get(key).copied()
    }

    pub fn offer(&mut self, key: K, weight: u64) {
        self.total += weight;
        if let Some(counter) = self.counters.get_mut(&key) {
            self.order.remove(&(counter.estimate, key));
            counter.estimate += weight;
            self.order.insert((counter.estimate, key));
            return;
        }
        let counter = if self.counters.len() < self.capacity {
            Counter {
                estimate: weight,
                error: 0,
            }
        } else {
            let (floor, victim) = self
                .order
                .pop_first()
                .expect("full sketch has a minimum entry");
            self.counters.remove(&victim);
            Counter {
                estimate: floor + weight,
                error: floor,
            }
        };
        self.order.insert((counter.estimate, key));
        self.counters.insert(key, counter);
    }

    /// The `k` heaviest entries, by estimate descending then key ascending.
    pub fn heavy(&self, k: usize) -> Result<Vec<(K, Counter)>> {
        if k > self.capacity {
            return Err(Error::invalid(format!(
                "requested top-{k} from a sketch of capacity {}",
                self.capacity
            )));
        }
        let mut all: Vec<_> = self.counters.iter().map(|(k, c)| (*k, *c)).collect();
        all.sort_by(|a, b| b.1.estimate.cmp(&a.1.estimate).then(a.0.cmp(&b.0)));
        all.truncate(k);
        Ok(all)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Counter)> {
        self.counters.iter()
    }

    /// Bytes needed to ship the sketch: key, estimate and error per entry.
    pub fn serialized_bytes(&self) -> u64 {
        self.counters.len() as u64 * 24
    }
}

pub fn sketch_offer<K: Copy + Ord + Hash>(sketch: &mut SpaceSaving<K>, key: K, weight: u64) {
    sketch.offer(key, weight);
}

pub fn sketch_heavy<K: Copy + Ord + Hash>(
    sketch: &SpaceSaving<K>,
    k: usize,
) -> Result<Vec<(K, u64)>> {
    Ok(sketch
        .heavy(k)?
        .into_iter()
        .map(|(key, c)| (key, c.estimate))
        .collect())
}
