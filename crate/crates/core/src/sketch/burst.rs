use serde::{Deserialize, Serialize};

/// One delivered time measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub size_bytes: u64,
    pub elapsed_ms: u64,
}

/// Batches time measurements of small reduce executions. A large execution
/// is always measured on its own; small ones accumulate until more than
/// `skip_threshold` are pending, and the burst's total time is then split
/// across them in proportion to their input sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BurstFilter {
    size_threshold: u64,
    skip_threshold: usize,
    pending: Vec<Measurement>,
}

impl BurstFilter {
    pub fn new(size_threshold: u64, skip_threshold: usize) -> Self {
        Self {
            size_threshold,
            skip_threshold,
            pending: Vec::new(),
        }
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn record(&mut self, size_bytes: u64, elapsed_ms: u64) -> Vec<Measurement> {
        let current = Measurement {
            size_bytes,
            elapsed_ms,
        };
        if size_bytes > self.size_threshold {
            let mut out = self.flush();
            out.push(current);
            return out;
        }
        self.pending.push(current);
        if self.pending.len() > self.skip_threshold {
            return self.flush();
        }
        Vec::new()
    }

    /// Delivers whatever is buffered (end of task).
    pub fn flush(&mut self) -> Vec<Measurement> {
        if self.pending.is_empty() {
            return Vec::new();
        }
        let burst = std::mem::take(&mut self.pending);
        let total: u64 = burst.iter().map(|m| m.elapsed_ms).sum();
        let sizes: Vec<u64> = burst.iter().map(|m| m.size_bytes).collect();
        let weights: Vec<u64> = if sizes.iter().all(|&s| s == 0) {
            vec![1; sizes.len()]
        } else {
            sizes.clone()
        };
        apportion(total, &weights)
            .into_iter()
            .zip(sizes)
            .map(|(elapsed_ms, size_bytes)| Measurement {
                size_bytes,
                elapsed_ms,
            })
            .collect()
    }
}

/// Largest-remainder split of `total` proportional to `weights`.
fn apportion(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    let mut shares: Vec<u64> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(weights.len());
    for (idx, &w) in weights.iter().enumerate() {
        let exact = total as u128 * w as u128;
        shares.push((exact / sum) as u64);
        remainders.push((exact % sum, idx));
    }
    let mut left = total - shares.iter().sum::<u64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, idx) in remainders {
        if left == 0 {
            break;
        }
        shares[idx] += 1;
        left -= 1;
    }
    shares
}

/// Runs a whole sequence through a fresh filter and flushes at the end.
pub fn burst_record(filter: &mut BurstFilter, executions: &[(u64, u64)]) -> Vec<Measurement> {
    let mut out = Vec::new();
    for &(size, elapsed) in executions {
        out.extend(filter.record(size, elapsed));
    }
    out.extend(filter.flush());
    out
}
