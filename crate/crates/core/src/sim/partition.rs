use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{KeyGroup, Partitioner};
use crate::error::{Error, Result};

/// Longest-processing-time-first: heaviest item to the least loaded task.
pub fn lpt_assign(weights: &[f64], tasks: u32) -> Vec<u32> {
    lpt_over(weights, (0..weights.len()).collect(), 0, tasks)
}

fn lpt_over(weights: &[f64], mut items: Vec<usize>, first: u32, tasks: u32) -> Vec<u32> {
    let mut out = vec![first; weights.len()];
    let span = tasks.saturating_sub(first).max(1) as usize;
    items.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut load = vec![0.0f64; span];
    for idx in items {
        let target = (0..span)
            .min_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b)))
            .unwrap_or(0);
        load[target] += weights[idx];
        out[idx] = first + target as u32;
    }
    out
}

/// The `heavy` heaviest items go to task 0; the others are balanced over
/// tasks `1..tasks` (or stay on task 0 when there is a single task).
pub fn unbalanced_assign(weights: &[f64], tasks: u32, heavy: usize) -> Vec<u32> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let split = heavy.min(order.len());
    let rest = order.split_off(split);
    if tasks <= 1 {
        return vec![0; weights.len()];
    }
    let mut out = lpt_over(weights, rest, 1, tasks);
    for idx in order {
        out[idx] = 0;
    }
    out
}

pub fn random_assign(items: usize, tasks: u32, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..items).map(|_| rng.gen_range(0..tasks)).collect()
}

/// Task index per key under `strategy`; `weights` drives the cost-aware
/// strategies.
pub fn assign_tasks(
    keys: &[KeyGroup],
    weights: &[f64],
    tasks: u32,
    strategy: &Partitioner,
    seed: u64,
) -> Result<Vec<u32>> {
    if tasks == 0 {
        return Err(Error::invalid("reducer count must be >= 1"));
    }
    Ok(match strategy {
        Partitioner::Hash => keys.iter().map(|k| (k.key.0 % tasks as u64) as u32).collect(),
        Partitioner::Random => random_assign(keys.len(), tasks, seed),
        Partitioner::Unbalanced { heavy } => unbalanced_assign(weights, tasks, *heavy),
        Partitioner::Optimal => lpt_assign(weights, tasks),
        Partitioner::Explicit { tasks: given } => {
            if given.len() != keys.len() || given.iter().any(|&t| t >= tasks) {
                return Err(Error::invalid("explicit assignment does not match keys"));
            }
            given.clone()
        }
    })
}

/// Splits `keys` into the per-task sets `K_i`, using sizes as weights.
pub fn partition_keys(
    keys: &[KeyGroup],
    tasks: u32,
    strategy: &Partitioner,
    seed: u64,
) -> Result<Vec<Vec<KeyGroup>>> {
    let weights: Vec<f64> = keys.iter().map(|k| k.size_bytes as f64).collect();
    let assignment = assign_tasks(keys, &weights, tasks, strategy, seed)?;
    let mut out = vec![Vec::new(); tasks as usize];
    for (key, task) in keys.iter().zip(assignment) {
        out[task as usize].push(*key);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::KeyId;

    fn groups(hashes: &[u64]) -> Vec<KeyGroup> {
        hashes.iter().map(|&h| KeyGroup::new(KeyId(h), h * 10)).collect()
    }

    #[test]
    fn single_task_gets_everything() {
        let keys = groups(&[5, 8, 13]);
        for strategy in [Partitioner::Hash, Partitioner::Random, Partitioner::Optimal] {
            let parts = partition_keys(&keys, 1, &strategy, 3).unwrap();
            assert_eq!(parts[0].len(), 3);
        }
    }

    #[test]
    fn hash_mod_rule() {
        let parts = partition_keys(&groups(&[2, 3, 4]), 2, &Partitioner::Hash, 0).unwrap();
        let ids: Vec<Vec<u64>> = parts
            .iter()
            .map(|p| p.iter().map(|k| k.key.0).collect())
            .collect();
        assert_eq!(ids, vec![vec![2, 4], vec![3]]);
    }

    #[test]
    fn unbalanced_pins_heaviest() {
        let w = [1.0, 9.0, 3.0, 7.0, 2.0, 8.0];
        let a = unbalanced_assign(&w, 3, 2);
        assert_eq!((a[1], a[5]), (0, 0));
        assert!(a.iter().enumerate().all(|(i, &t)| (i == 1 || i == 5) || t != 0));
    }

    #[test]
    fn zero_tasks_rejected() {
        assert!(partition_keys(&groups(&[1]), 0, &Partitioner::Hash, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn every_key_lands_in_exactly_one_task(
            hashes in proptest::collection::btree_set(0u64..1_000_000, 0..200),
            tasks in 1u32..9,
            which in 0usize..4,
            seed in 0u64..50,
        ) {
            let keys = groups(&hashes.into_iter().collect::<Vec<_>>());
            let strategy = [
                Partitioner::Hash,
                Partitioner::Random,
                Partitioner::Optimal,
                Partitioner::Unbalanced { heavy: 3 },
            ][which].clone();
            let parts = partition_keys(&keys, tasks, &strategy, seed).unwrap();
            let mut seen: Vec<u64> = parts.iter().flatten().map(|k| k.key.0).collect();
            seen.sort_unstable();
            let mut expected: Vec<u64> = keys.iter().map(|k| k.key.0).collect();
            expected.sort_unstable();
            proptest::prop_assert_eq!(seen, expected);
        }
    }
}
