use crate::error::{Error, Result};
use crate::sketch::SpaceSaving;

/// Approximate frequency histogram of the most common key-group sizes,
/// kept under the same bounded eviction policy as [`SpaceSaving`].
#[derive(Clone, Debug)]
pub struct SizeHistogram {
    counts: SpaceSaving<u64>,
}

impl SizeHistogram {
    pub fn new(capacity: usize) -> Result<Self> {
        Ok(Self {
            counts: SpaceSaving::new(capacity)?,
        })
    }

    pub fn observe(&mut self, size_bytes: u64) {
        self.counts.offer(size_bytes, 1);
    }

    pub fn observe_many(&mut self, size_bytes: u64, times: u64) {
        self.counts.offer(size_bytes, times);
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(size, frequency)` buckets sorted by size.
    pub fn buckets(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<_> = self
            .counts
            .iter()
            .map(|(size, c)| (*size, c.estimate))
            .collect();
        out.sort_unstable();
        out
    }

    /// Splits `total_bytes` across buckets in proportion to each bucket's
    /// byte mass (`size * frequency`), returning `(size, fractional count)`.
    pub fn partition(&self, total_bytes: f64) -> Result<Vec<(f64, f64)>> {
        if total_bytes <= 0.0 {
            return Ok(Vec::new());
        }
        let buckets = self.buckets();
        let mass: f64 = buckets.iter().map(|&(s, f)| s as f64 * f as f64).sum();
        if mass <= 0.0 {
            return Err(Error::EmptyHistogram { bytes: total_bytes });
        }
        Ok(buckets
            .into_iter()
            .filter(|&(size, freq)| size > 0 && freq > 0)
            .map(|(size, freq)| {
                let share = total_bytes * (size as f64 * freq as f64) / mass;
                (size as f64, share / size as f64)
            })
            .collect())
    }
}

pub fn histogram_partition(hist: &SizeHistogram, total_bytes: f64) -> Result<Vec<(f64, f64)>> {
    hist.partition(total_bytes)
}
