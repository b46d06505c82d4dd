//! Shared value types: key hashes, simulated time, cost models and the
//! job/cluster/indicator configuration records.

use std::fmt;
use std::hash::Hasher;
use std::ops::{Add, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::regression::DeltaPolicy;

/// Pinned digest seed. Changing it changes every trace.
pub const KEY_HASH_SEED: u64 = 0x6b65_795f_6861_7368;

/// 64-bit digest of a serialized intermediate key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(pub u64);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

pub fn hash_key(key_bytes: &[u8]) -> Result<KeyId> {
    if key_bytes.is_empty() {
        return Err(Error::invalid("cannot hash an empty key"));
    }
    let mut hasher = XxHash64::with_seed(KEY_HASH_SEED);
    hasher.write(key_bytes);
    Ok(KeyId(hasher.finish()))
}

/// A key together with the byte size of its value set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyGroup {
    pub key: KeyId,
    pub size_bytes: u64,
}

impl KeyGroup {
    pub fn new(key: KeyId, size_bytes: u64) -> Self {
        Self { key, size_bytes }
    }
}

/// Simulated wall-clock, in whole milliseconds.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0.saturating_sub(rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    /// `coefficient * size^exponent`
    Polynomial { coefficient: f64, exponent: f64 },
    /// `coefficient * left * right`, for join-like reducers whose work is
    /// the cross product of two tuple multiplicities.
    Product { coefficient: f64 },
    /// Piecewise-linear interpolation over `(size, ms)` points sorted by size.
    Table { points: Vec<(f64, f64)> },
}

/// Ground-truth running time of a map or reduce function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(flatten)]
    pub kind: CostKind,
    /// Multiplicative noise amplitude in `[0, 1)`.
    #[serde(default)]
    pub noise: f64,
}

impl CostModel {
    pub fn polynomial(coefficient: f64, exponent: f64) -> Self {
        Self {
            kind: CostKind::Polynomial {
                coefficient,
                exponent,
            },
            noise: 0.0,
        }
    }

    pub fn product(coefficient: f64) -> Self {
        Self {
            kind: CostKind::Product { coefficient },
            noise: 0.0,
        }
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            kind: CostKind::Table { points },
            noise: 0.0,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::field(format!("{field}.noise"), "must lie in [0, 1)"));
        }
        match &self.kind {
            CostKind::Polynomial {
                coefficient,
                exponent,
            } => {
                if !(coefficient.is_finite() && *coefficient >= 0.0) {
                    return Err(Error::field(
                        format!("{field}.coefficient"),
                        "must be finite and >= 0",
                    ));
                }
                if !(exponent.is_finite() && *exponent >= 0.0) {
                    return Err(Error::field(
                        format!("{field}.exponent"),
                        "must be finite and >= 0",
                    ));
                }
            }
            CostKind::Product { coefficient } => {
                if !(coefficient.is_finite() && *coefficient >= 0.0) {
                    return Err(Error::field(
                        format!("{field}.coefficient"),
                        "must be finite and >= 0",
                    ));
                }
            }
            CostKind::Table { points } => {
                if points.is_empty() {
                    return Err(Error::field(format!("{field}.points"), "must not be empty"));
                }
                if points.iter().any(|&(x, y)| !(x >= 0.0 && y >= 0.0)) {
                    return Err(Error::field(
                        format!("{field}.points"),
                        "sizes and times must be >= 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Noise-free cost of an input of `size_bytes`. `factors` carries the
    /// two tuple multiplicities for product models.
    pub fn expected(&self, size_bytes: u64, factors: Option<(u64, u64)>) -> Result<f64> {
        let x = size_bytes as f64;
        let value = match &self.kind {
            CostKind::Polynomial {
                coefficient,
                exponent,
            } => {
                if *exponent == 0.0 {
                    *coefficient
                } else {
                    coefficient * x.powf(*exponent)
                }
            }
            CostKind::Product { coefficient } => {
                let (left, right) = factors.ok_or_else(|| {
                    Error::invalid("product cost model needs tuple multiplicities")
                })?;
                coefficient * left as f64 * right as f64
            }
            CostKind::Table { points } => interpolate(points, x),
        };
        Ok(value.max(0.0))
    }

    /// Cost with seed-deterministic multiplicative noise applied.
    pub fn eval(&self, size_bytes: u64, factors: Option<(u64, u64)>, seed: u64) -> Result<f64> {
        let base = self.expected(size_bytes, factors)?;
        if self.noise == 0.0 {
            return Ok(base);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: f64 = rng.gen_range(-self.noise..=self.noise);
        Ok((base * (1.0 + eps)).max(0.0))
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    match points {
        [] => 0.0,
        [(_, y)] => *y,
        _ => {
            let idx = points.partition_point(|p| p.0 <= x);
            let (lo, hi) = if idx == 0 {
                (points[0], points[1])
            } else if idx >= points.len() {
                (points[points.len() - 2], points[points.len() - 1])
            } else {
                (points[idx - 1], points[idx])
            };
            if hi.0 == lo.0 {
                return hi.1;
            }
            lo.1 + (hi.1 - lo.1) * (x - lo.0) / (hi.0 - lo.0)
        }
    }
}

/// Evaluates `model` on a (possibly negative, hence rejected) input size.
pub fn eval_cost(model: &CostModel, size_bytes: i64, rng_seed: u64) -> Result<f64> {
    if size_bytes < 0 {
        return Err(Error::invalid(format!("negative input size {size_bytes}")));
    }
    model.eval(size_bytes as u64, None, rng_seed)
}

/// Mixes a run seed with a per-item discriminator (splitmix64 finalizer).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One input chunk of the map phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSplit {
    pub pairs: u64,
    pub bytes_per_pair: u64,
}

impl MapSplit {
    pub fn bytes(&self) -> u64 {
        self.pairs * self.bytes_per_pair
    }
}

/// An intermediate key with the bytes each map task emitted for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermediateKey {
    pub key: KeyId,
    pub map_sizes: Vec<u64>,
    /// Tuple multiplicities for product cost models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<(u64, u64)>,
}

impl IntermediateKey {
    pub fn size_bytes(&self) -> u64 {
        self.map_sizes.iter().sum()
    }

    pub fn group(&self) -> KeyGroup {
        KeyGroup::new(self.key, self.size_bytes())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Partitioner {
    #[default]
    Hash,
    Random,
    /// The `heavy` costliest keys go to task 0, the rest are balanced
    /// over the remaining tasks.
    Unbalanced { heavy: usize },
    /// Longest-processing-time-first balancing by expected cost.
    Optimal,
    /// Precomputed task per key, index-aligned with `intermediate_keys`.
    Explicit { tasks: Vec<u32> },
}

impl Partitioner {
    pub fn tag(&self) -> &'static str {
        match self {
            Partitioner::Hash => "hash",
            Partitioner::Random => "random",
            Partitioner::Unbalanced { .. } => "unbalanced",
            Partitioner::Optimal => "optimal",
            Partitioner::Explicit { .. } => "explicit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub map_splits: Vec<MapSplit>,
    pub map_cost: CostModel,
    pub reduce_cost: CostModel,
    pub intermediate_keys: Vec<IntermediateKey>,
    pub reducers: u32,
    pub partitioner: Partitioner,
    /// Bytes per millisecond; `None` makes shuffling instantaneous.
    pub shuffle_rate: Option<f64>,
}

impl JobSpec {
    pub fn map_tasks(&self) -> usize {
        self.map_splits.len()
    }

    pub fn total_shuffle_bytes(&self) -> u64 {
        self.intermediate_keys.iter().map(|k| k.size_bytes()).sum()
    }

    pub fn shuffle_time(&self, bytes: u64) -> u64 {
        match self.shuffle_rate {
            Some(rate) => (bytes as f64 / rate).ceil() as u64,
            None => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reducers == 0 {
            return Err(Error::field("reducers", "must be >= 1"));
        }
        if self.map_splits.is_empty() {
            return Err(Error::field("map_splits", "must not be empty"));
        }
        if let Some(rate) = self.shuffle_rate {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::field("shuffle_rate", "must be > 0"));
            }
        }
        self.map_cost.validate("map_cost")?;
        self.reduce_cost.validate("reduce_cost")?;
        let m = self.map_splits.len();
        for (idx, key) in self.intermediate_keys.iter().enumerate() {
            if key.map_sizes.len() != m {
                return Err(Error::field(
                    format!("intermediate_keys[{idx}].map_sizes"),
                    format!("expected {m} entries, got {}", key.map_sizes.len()),
                ));
            }
        }
        if let Partitioner::Explicit { tasks } = &self.partitioner {
            if tasks.len() != self.intermediate_keys.len() {
                return Err(Error::field(
                    "partitioner.tasks",
                    "must have one entry per intermediate key",
                ));
            }
            if tasks.iter().any(|&t| t >= self.reducers) {
                return Err(Error::field("partitioner.tasks", "task index >= reducers"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub workers: u32,
    pub slots_per_worker: u32,
}

impl ClusterSpec {
    pub fn new(workers: u32, slots_per_worker: u32) -> Self {
        Self {
            workers,
            slots_per_worker,
        }
    }

    pub fn parallelism(&self) -> usize {
        self.workers as usize * self.slots_per_worker as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::field("cluster.workers", "must be >= 1"));
        }
        if self.slots_per_worker == 0 {
            return Err(Error::field("cluster.slots_per_worker", "must be >= 1"));
        }
        Ok(())
    }
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self::new(1, 1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    /// Key-free profiles: top-lambda explicit keys plus implicit aggregates.
    #[default]
    Approximate,
    /// Exact per-key sizes for every reduce task.
    Oracle,
}

/// Tuning knobs shared by the NearestFit indicator and the baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NearestFitConfig {
    pub mode: ProfileMode,
    /// Explicit keys reported per map task.
    pub lambda: usize,
    /// Master-side Space Saving capacity; `None` means `35 * lambda`.
    pub master_sketch_capacity: Option<usize>,
    pub delta: DeltaPolicy,
    pub r2_threshold: f64,
    pub smoothing_window_ms: u64,
    pub bursting: bool,
    pub burst_size_threshold_bytes: u64,
    pub burst_skip_threshold: usize,
    /// Relative tolerance when matching a finished size to an explicit size.
    pub match_tolerance: f64,
    pub histogram_capacity: usize,
    pub update_interval_ms: u64,
    /// EWMA weight for the ratio baselines; `None` disables smoothing.
    pub ewma_alpha: Option<f64>,
    /// TaskRatio uses its private rate once this fraction of its bytes is done.
    pub warmup_fraction: f64,
}

impl Default for NearestFitConfig {
    fn default() -> Self {
        Self {
            mode: ProfileMode::Approximate,
            lambda: 2000,
            master_sketch_capacity: None,
            delta: DeltaPolicy::default(),
            r2_threshold: 0.9,
            smoothing_window_ms: 500,
            bursting: true,
            burst_size_threshold_bytes: 50,
            burst_skip_threshold: 100,
            match_tolerance: 0.05,
            histogram_capacity: 1024,
            update_interval_ms: 60_000,
            ewma_alpha: None,
            warmup_fraction: 0.05,
        }
    }
}

impl NearestFitConfig {
    pub fn sketch_capacity(&self) -> usize {
        self.master_sketch_capacity.unwrap_or(35 * self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::field("nearestfit.lambda", "must be >= 1"));
        }
        if self.sketch_capacity() == 0 {
            return Err(Error::field(
                "nearestfit.master_sketch_capacity",
                "must be >= 1",
            ));
        }
        if !(self.r2_threshold > 0.0 && self.r2_threshold <= 1.0) {
            return Err(Error::field("nearestfit.r2_threshold", "must lie in (0, 1]"));
        }
        if self.smoothing_window_ms == 0 {
            return Err(Error::field("nearestfit.smoothing_window_ms", "must be > 0"));
        }
        if self.burst_size_threshold_bytes == 0 || self.burst_skip_threshold == 0 {
            return Err(Error::field("nearestfit.burst_*", "thresholds must be > 0"));
        }
        if !(self.match_tolerance >= 0.0 && self.match_tolerance < 1.0) {
            return Err(Error::field("nearestfit.match_tolerance", "must lie in [0, 1)"));
        }
        if self.histogram_capacity == 0 {
            return Err(Error::field("nearestfit.histogram_capacity", "must be >= 1"));
        }
        if self.update_interval_ms == 0 {
            return Err(Error::field("nearestfit.update_interval_ms", "must be > 0"));
        }
        if let Some(alpha) = self.ewma_alpha {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::field("nearestfit.ewma_alpha", "must lie in (0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::field("nearestfit.warmup_fraction", "must lie in [0, 1]"));
        }
        self.delta.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn hash_is_deterministic_and_rejects_empty() {
        assert_eq!(hash_key(b"word").unwrap(), hash_key(b"word").unwrap());
        assert!(matches!(hash_key(b""), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_byte_keys_do_not_collide() {
        let ids: HashSet<_> = (0..=255u8).map(|b| hash_key(&[b]).unwrap()).collect();
        assert_eq!(ids.len(), 256);
    }

    #[test]
    fn hash_collisions_on_large_corpus_are_counted() {
        let n = 200_000u64;
        let ids: HashSet<_> = (0..n)
            .map(|i| hash_key(format!("key-{i}").as_bytes()).unwrap())
            .collect();
        let collisions = n - ids.len() as u64;
        assert_eq!(collisions, 0, "{collisions} collisions among {n} keys");
    }

    #[test]
    fn polynomial_and_product_costs() {
        let linear = CostModel::polynomial(1.0, 1.0);
        assert_eq!(eval_cost(&linear, 100, 0).unwrap(), 100.0);
        let quad = CostModel::polynomial(0.01, 2.0);
        assert!((eval_cost(&quad, 100, 0).unwrap() - 100.0).abs() < 1e-9);
        let join = CostModel::product(1.0);
        assert_eq!(join.eval(0, Some((3, 4)), 0).unwrap(), 12.0);
        assert!(join.eval(7, None, 0).is_err());
    }

    #[test]
    fn negative_size_is_rejected() {
        let linear = CostModel::polynomial(1.0, 1.0);
        assert!(matches!(
            eval_cost(&linear, -1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let model = CostModel::polynomial(1.0, 1.0).with_noise(0.1);
        for seed in 0..200 {
            let a = model.eval(1000, None, seed).unwrap();
            assert_eq!(a, model.eval(1000, None, seed).unwrap());
            assert!((900.0..=1100.0).contains(&a), "{a}");
        }
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let model = CostModel::table(vec![(10.0, 5.0), (0.0, 0.0), (20.0, 25.0)]);
        assert_eq!(model.expected(5, None).unwrap(), 2.5);
        assert_eq!(model.expected(15, None).unwrap(), 15.0);
        assert_eq!(model.expected(30, None).unwrap(), 45.0);
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = NearestFitConfig::default();
        assert_eq!(cfg.sketch_capacity(), 70_000);
        cfg.r2_threshold = 0.0;
        match cfg.validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "nearestfit.r2_threshold"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ClusterSpec::new(0, 2).validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn noiseless_cost_is_monotone(a in 0u64..100_000, b in 0u64..100_000, p in 0.0f64..4.0) {
            let model = CostModel::polynomial(0.5, p);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(model.eval(lo, None, 1).unwrap() <= model.eval(hi, None, 2).unwrap());
        }
    }
}
