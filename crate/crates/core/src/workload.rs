//! Synthetic workload generators: the sigma-skew benchmark, Zipf-distributed
//! join relations and blocked matrix-multiplication products.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{hash_key, IntermediateKey, KeyGroup, KeyId};
use crate::error::{Error, Result};
use crate::sim::partition::{lpt_assign, random_assign, unbalanced_assign};

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

fn fresh_key(namespace: &str, a: u64, b: u64) -> KeyId {
    hash_key(format!("{namespace}:{a}:{b}").as_bytes()).expect("non-empty key")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewSpec {
    pub sigma: f64,
    pub n_max: u64,
    #[serde(default)]
    pub total_budget: Option<u64>,
}

/// Level `i` holds `round(sigma^i)` groups of `round(n_max / sigma^i)` bytes,
/// for every `i` with `n_max / sigma^i >= 1`. Output is size-descending.
pub fn gen_sigma_skew(spec: &SkewSpec) -> Result<Vec<KeyGroup>> {
    if !(spec.sigma > 1.0 && spec.sigma.is_finite()) {
        return Err(Error::field("workload.sigma", "must be > 1"));
    }
    if spec.n_max == 0 {
        return Err(Error::field("workload.n_max", "must be >= 1"));
    }
    let budget = spec.total_budget.unwrap_or(u64::MAX);
    let mut out = Vec::new();
    let mut total = 0u64;
    let n = spec.n_max as f64;
    'levels: for level in 0u64.. {
        let scale = spec.sigma.powi(level as i32);
        let exact = n / scale;
        if exact < 1.0 {
            break;
        }
        let size = round_half_up(exact);
        for idx in 0..round_half_up(scale) {
            if total + size > budget {
                break 'levels;
            }
            total += size;
            out.push(KeyGroup::new(fresh_key("sigma", level, idx), size));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub s: f64,
    pub distinct_keys: u64,
    pub tuples: u64,
}

impl ZipfSpec {
    fn validate(&self, field: &str) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::field(format!("{field}.s"), "must be > 0"));
        }
        if self.distinct_keys == 0 {
            return Err(Error::field(format!("{field}.distinct_keys"), "must be >= 1"));
        }
        if self.tuples == 0 {
            return Err(Error::field(format!("{field}.tuples"), "must be >= 1"));
        }
        Ok(())
    }
}

/// Deterministic Zipf quotas: rank `k` (1-based) gets `floor(C * k^-s)`
/// tuples with `C = tuples / sum_k k^-s`. Returned in rank order.
pub fn zipf_quotas(spec: &ZipfSpec) -> Result<Vec<u64>> {
    spec.validate("zipf")?;
    let harmonic: f64 = (1..=spec.distinct_keys)
        .map(|k| (k as f64).powf(-spec.s))
        .sum();
    let c = spec.tuples as f64 / harmonic;
    Ok((1..=spec.distinct_keys)
        .map(|k| {
            // Guard against 5.999999 style floor artefacts.
            let q = c * (k as f64).powf(-spec.s);
            (q + 1e-9).floor() as u64
        })
        .collect())
}

/// Keys with their tuple multiplicities `n(k)`, rank order, zero-count keys
/// dropped. The seed picks key identities.
pub fn gen_zipf_relation(spec: &ZipfSpec, seed: u64) -> Result<Vec<(KeyId, u64)>> {
    Ok(zipf_quotas(spec)?
        .into_iter()
        .enumerate()
        .filter(|(_, n)| *n > 0)
        .map(|(rank, n)| (fresh_key("zipf", seed, rank as u64), n))
        .collect())
}

/// Seeded sampling variant: draws `tuples` ranks from the Zipf law.
pub fn gen_zipf_sampled(spec: &ZipfSpec, seed: u64) -> Result<Vec<(KeyId, u64)>> {
    spec.validate("zipf")?;
    let mut cdf = Vec::with_capacity(spec.distinct_keys as usize);
    let mut acc = 0.0;
    for k in 1..=spec.distinct_keys {
        acc += (k as f64).powf(-spec.s);
        cdf.push(acc);
    }
    let mut counts = vec![0u64; cdf.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..spec.tuples {
        let u = rng.gen::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|(_, n)| *n > 0)
        .map(|(rank, n)| (fresh_key("zipf", seed, rank as u64), n))
        .collect())
}

/// A key of a join workload: multiplicities in both relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinKey {
    pub key: KeyId,
    pub left: u64,
    pub right: u64,
}

/// Rank-aligned join of two relations. With `right == None` every key has
/// exactly one tuple on the right side.
pub fn gen_zipf_join(left: &ZipfSpec, right: Option<&ZipfSpec>, seed: u64) -> Result<Vec<JoinKey>> {
    let lq = zipf_quotas(left)?;
    let rq = match right {
        Some(spec) => zipf_quotas(spec)?,
        None => vec![1; lq.len()],
    };
    let n = lq.len().max(rq.len());
    Ok((0..n)
        .map(|rank| JoinKey {
            key: fresh_key("join", seed, rank as u64),
            left: lq.get(rank).copied().unwrap_or(0),
            right: rq.get(rank).copied().unwrap_or(0),
        })
        .filter(|k| k.left + k.right > 0)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    Optimal,
    Random,
    Unbalanced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityLayout {
    /// Every block has density 0.25.
    Uniform,
    /// Density doubles towards the last column of A and the last row of B.
    Positional,
}

/// One block product `A(i, l) * B(l, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockProduct {
    pub key: KeyId,
    pub row: u32,
    pub inner: u32,
    pub col: u32,
    /// Non-zeros of the two input blocks.
    pub nnz_left: u64,
    pub nnz_right: u64,
    /// `side^3 * d * d'`
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatMultWorkload {
    pub side: u64,
    pub products: Vec<BlockProduct>,
    /// Reduce task per product.
    pub assignment: Vec<u32>,
}

fn block_density(layout: DensityLayout, grid: u32, index: u32) -> f64 {
    match layout {
        DensityLayout::Uniform => 0.25,
        DensityLayout::Positional => 1.0 / 2f64.powi((grid - 1 - index) as i32),
    }
}

/// Blocked multiplication of two matrices of `blocks` blocks each (a
/// perfect square), giving `blocks^{3/2}` products assigned to `reducers`.
pub fn gen_matmult_products(
    blocks: u32,
    balance: Balance,
    layout: DensityLayout,
    side: u64,
    reducers: u32,
    seed: u64,
) -> Result<MatMultWorkload> {
    let grid = (blocks as f64).sqrt().round() as u32;
    if blocks == 0 || grid * grid != blocks {
        return Err(Error::field(
            "workload.blocks",
            format!("{blocks} is not a positive perfect square"),
        ));
    }
    if side == 0 {
        return Err(Error::field("workload.side", "must be >= 1"));
    }
    if reducers == 0 {
        return Err(Error::field("reducers", "must be >= 1"));
    }
    let area = (side * side) as f64;
    let mut products = Vec::with_capacity((grid * grid * grid) as usize);
    for row in 0..grid {
        for col in 0..grid {
            for inner in 0..grid {
                // A(row, inner) varies with its column; B(inner, col) with its row.
                let d = block_density(layout, grid, inner);
                let d_prime = block_density(layout, grid, inner);
                let idx = ((row * grid + col) * grid + inner) as u64;
                products.push(BlockProduct {
                    key: fresh_key("matmult", seed, idx),
                    row,
                    inner,
                    col,
                    nnz_left: round_half_up(area * d).max(1),
                    nnz_right: round_half_up(area * d_prime).max(1),
                    cost: (side as f64).powi(3) * d * d_prime,
                });
            }
        }
    }
    let weights: Vec<f64> = products.iter().map(|p| p.cost).collect();
    let assignment = match balance {
        Balance::Optimal => lpt_assign(&weights, reducers),
        Balance::Random => random_assign(products.len(), reducers, seed),
        Balance::Unbalanced => unbalanced_assign(&weights, reducers, blocks as usize),
    };
    Ok(MatMultWorkload {
        side,
        products,
        assignment,
    })
}

/// Splits `size` bytes over `map_tasks` round-robin, starting at `offset`.
pub fn spread_round_robin(size: u64, map_tasks: usize, offset: usize) -> Vec<u64> {
    let m = map_tasks.max(1);
    let base = size / m as u64;
    let extra = (size % m as u64) as usize;
    let mut out = vec![base; m];
    for step in 0..extra {
        out[(offset + step) % m] += 1;
    }
    out
}

/// Generated intermediate data plus an optional fixed reduce assignment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub map_tasks: usize,
    pub keys: Vec<IntermediateKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<u32>>,
}

impl Workload {
    pub fn from_groups(groups: &[KeyGroup], map_tasks: usize) -> Self {
        let keys = groups
            .iter()
            .enumerate()
            .map(|(idx, g)| IntermediateKey {
                key: g.key,
                map_sizes: spread_round_robin(g.size_bytes, map_tasks, idx),
                factors: None,
            })
            .collect();
        Self {
            map_tasks: map_tasks.max(1),
            keys,
            assignment: None,
        }
    }

    pub fn from_join(keys: &[JoinKey], tuple_bytes: u64, map_tasks: usize) -> Self {
        let keys = keys
            .iter()
            .enumerate()
            .map(|(idx, k)| IntermediateKey {
                key: k.key,
                map_sizes: spread_round_robin((k.left + k.right) * tuple_bytes, map_tasks, idx),
                factors: Some((k.left, k.right)),
            })
            .collect();
        Self {
            map_tasks: map_tasks.max(1),
            keys,
            assignment: None,
        }
    }

    pub fn from_matmult(w: &MatMultWorkload, entry_bytes: u64, map_tasks: usize) -> Self {
        let keys = w
            .products
            .iter()
            .enumerate()
            .map(|(idx, p)| IntermediateKey {
                key: p.key,
                map_sizes: spread_round_robin(
                    (p.nnz_left + p.nnz_right) * entry_bytes,
                    map_tasks,
                    idx,
                ),
                factors: Some((p.nnz_left, p.nnz_right)),
            })
            .collect();
        Self {
            map_tasks: map_tasks.max(1),
            keys,
            assignment: Some(w.assignment.clone()),
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.keys.iter().map(|k| k.size_bytes()).sum()
    }

    /// Bytes emitted by each map task.
    pub fn map_output_bytes(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.map_tasks];
        for key in &self.keys {
            for (slot, &b) in out.iter_mut().zip(&key.map_sizes) {
                *slot += b;
            }
        }
        out
    }

    /// Writes the documented CSV form:
    /// `key,left,right,task,map_sizes` with `map_sizes` joined by `;` and
    /// empty `left`/`right`/`task` fields when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "left", "right", "task", "map_sizes"])?;
        for (idx, key) in self.keys.iter().enumerate() {
            let (left, right) = key
                .factors
                .map(|(l, r)| (l.to_string(), r.to_string()))
                .unwrap_or_default();
            let task = self
                .assignment
                .as_ref()
                .map(|a| a[idx].to_string())
                .unwrap_or_default();
            let sizes = key
                .map_sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([key.key.to_string(), left, right, task, sizes])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut keys = Vec::new();
        let mut tasks = Vec::new();
        let mut map_tasks = None;
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let row = line + 2;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let bad = |what: &str| Error::Parse(format!("workload line {row}: bad {what}"));
            let key = u64::from_str_radix(field(0), 16).map_err(|_| bad("key"))?;
            let factors = match (field(1), field(2)) {
                ("", "") => None,
                (l, r) => Some((
                    l.parse().map_err(|_| bad("left"))?,
                    r.parse().map_err(|_| bad("right"))?,
                )),
            };
            match field(3) {
                "" => {}
                t => tasks.push(t.parse::<u32>().map_err(|_| bad("task"))?),
            }
            let map_sizes = field(4)
                .split(';')
                .map(|s| s.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("map_sizes"))?;
            if *map_tasks.get_or_insert(map_sizes.len()) != map_sizes.len() {
                return Err(bad("map_sizes length"));
            }
            keys.push(IntermediateKey {
                key: KeyId(key),
                map_sizes,
                factors,
            });
        }
        let assignment = match tasks.len() {
            0 => None,
            n if n == keys.len() => Some(tasks),
            _ => return Err(Error::Parse("task column must be all set or all empty".into())),
        };
        Ok(Self {
            map_tasks: map_tasks.unwrap_or(1),
            keys,
            assignment,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sigma_two_levels() {
        let groups = gen_sigma_skew(&SkewSpec {
            sigma: 2.0,
            n_max: 8,
            total_budget: None,
        })
        .unwrap();
        let sizes: Vec<u64> = groups.iter().map(|g| g.size_bytes).collect();
        assert_eq!(sizes, vec![8, 4, 4, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1]);
        assert_eq!(sizes.iter().sum::<u64>(), 32);
        let keys: HashSet<_> = groups.iter().map(|g| g.key).collect();
        assert_eq!(keys.len(), groups.len());
    }

    #[test]
    fn mild_sigma_rounding() {
        let groups = gen_sigma_skew(&SkewSpec {
            sigma: 1.05,
            n_max: 100,
            total_budget: None,
        })
        .unwrap();
        // levels 0..=7 have round(1.05^i) == 1, levels 8..=14 have 1 or 2
        assert_eq!(groups[0].size_bytes, 100);
        assert_eq!(groups[1].size_bytes, 95);
        let mut counts = std::collections::BTreeMap::<u64, u64>::new();
        for level in 0..=14u64 {
            let c = round_half_up(1.05f64.powi(level as i32));
            assert!(c == 1 || c == 2);
            counts.insert(level, c);
        }
        let level_sizes: Vec<u64> = (0..=14)
            .map(|i| round_half_up(100.0 / 1.05f64.powi(i)))
            .collect();
        let mut idx = 0;
        for (level, size) in level_sizes.iter().enumerate() {
            for _ in 0..counts[&(level as u64)] {
                assert_eq!(groups[idx].size_bytes, *size);
                idx += 1;
            }
        }
    }

    #[test]
    fn sigma_must_exceed_one() {
        let err = gen_sigma_skew(&SkewSpec {
            sigma: 0.9,
            n_max: 10,
            total_budget: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("workload.sigma"));
    }

    #[test]
    fn budget_truncates() {
        let groups = gen_sigma_skew(&SkewSpec {
            sigma: 2.0,
            n_max: 8,
            total_budget: Some(17),
        })
        .unwrap();
        assert_eq!(groups.iter().map(|g| g.size_bytes).sum::<u64>(), 16);
    }

    #[test]
    fn zipf_quota_exact_normalisation() {
        // H_3 = 11/6, C = 11 / (11/6) = 6 -> 6, 3, 2
        let spec = ZipfSpec {
            s: 1.0,
            distinct_keys: 3,
            tuples: 11,
        };
        assert_eq!(zipf_quotas(&spec).unwrap(), vec![6, 3, 2]);
        let rel = gen_zipf_relation(&spec, 4).unwrap();
        assert_eq!(rel, gen_zipf_relation(&spec, 4).unwrap());
        assert_ne!(rel[0].0, gen_zipf_relation(&spec, 5).unwrap()[0].0);
    }

    #[test]
    fn tiny_zipf_exponent_is_near_uniform() {
        let q = zipf_quotas(&ZipfSpec {
            s: 0.0001,
            distinct_keys: 4,
            tuples: 4000,
        })
        .unwrap();
        assert!(q.iter().all(|&n| (998..=1001).contains(&n)), "{q:?}");
    }

    #[test]
    fn sampled_zipf_is_seeded() {
        let spec = ZipfSpec {
            s: 1.5,
            distinct_keys: 50,
            tuples: 2000,
        };
        let a = gen_zipf_sampled(&spec, 9).unwrap();
        assert_eq!(a, gen_zipf_sampled(&spec, 9).unwrap());
        assert_eq!(a.iter().map(|x| x.1).sum::<u64>(), 2000);
    }

    #[test]
    fn uniform_right_side_join_is_linear_in_left() {
        let keys = gen_zipf_join(
            &ZipfSpec {
                s: 1.0,
                distinct_keys: 10,
                tuples: 500,
            },
            None,
            1,
        )
        .unwrap();
        assert!(keys.iter().all(|k| k.right == 1));
        let model = crate::domain::CostModel::product(2.0);
        for k in &keys {
            let cost = model.expected(0, Some((k.left, k.right))).unwrap();
            assert_eq!(cost, 2.0 * k.left as f64);
        }
    }

    #[test]
    fn matmult_unbalanced_pins_costliest() {
        let w = gen_matmult_products(4, Balance::Unbalanced, DensityLayout::Positional, 8, 3, 0)
            .unwrap();
        assert_eq!(w.products.len(), 8);
        let mut by_cost: Vec<usize> = (0..8).collect();
        by_cost.sort_by(|&a, &b| w.products[b].cost.total_cmp(&w.products[a].cost));
        for &i in &by_cost[..4] {
            assert_eq!(w.assignment[i], 0);
        }
        for &i in &by_cost[4..] {
            assert_ne!(w.assignment[i], 0);
        }
    }

    fn brute_force_best_ratio(costs: &[f64], tasks: u32) -> f64 {
        let n = costs.len();
        let mut best = f64::INFINITY;
        for code in 0..(tasks as usize).pow(n as u32) {
            let mut load = vec![0.0; tasks as usize];
            let mut c = code;
            for cost in costs {
                load[c % tasks as usize] += cost;
                c /= tasks as usize;
            }
            let (lo, hi) = load
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
            if lo > 0.0 {
                best = best.min(hi / lo);
            }
        }
        best
    }

    #[test]
    fn matmult_optimal_matches_exhaustive_balance() {
        for tasks in [2u32, 3] {
            let w = gen_matmult_products(4, Balance::Optimal, DensityLayout::Positional, 8, tasks, 0)
                .unwrap();
            let mut load = vec![0.0; tasks as usize];
            for (p, &t) in w.products.iter().zip(&w.assignment) {
                load[t as usize] += p.cost;
            }
            let ratio = load.iter().cloned().fold(0.0, f64::max)
                / load.iter().cloned().fold(f64::INFINITY, f64::min);
            let costs: Vec<f64> = w.products.iter().map(|p| p.cost).collect();
            let best = brute_force_best_ratio(&costs, tasks);
            assert!((ratio - best).abs() < 1e-9, "tasks={tasks} lpt={ratio} best={best}");
        }
    }

    #[test]
    fn matmult_random_is_seeded_and_validates() {
        let a = gen_matmult_products(9, Balance::Random, DensityLayout::Uniform, 4, 4, 17).unwrap();
        let b = gen_matmult_products(9, Balance::Random, DensityLayout::Uniform, 4, 4, 17).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.products.len(), 27);
        assert!(gen_matmult_products(5, Balance::Random, DensityLayout::Uniform, 4, 4, 1).is_err());
    }

    #[test]
    fn round_robin_conserves_bytes() {
        assert_eq!(spread_round_robin(10, 4, 3), vec![3, 2, 2, 3]);
        assert_eq!(spread_round_robin(2, 4, 3), vec![1, 0, 0, 1]);
    }

    #[test]
    fn csv_round_trip() {
        let w = gen_matmult_products(4, Balance::Optimal, DensityLayout::Uniform, 4, 2, 0).unwrap();
        let wl = Workload::from_matmult(&w, 12, 3);
        let mut buf = Vec::new();
        wl.write_csv(&mut buf).unwrap();
        assert_eq!(Workload::read_csv(buf.as_slice()).unwrap(), wl);
        assert!(Workload::read_csv("key,left,right,task,map_sizes\nzz,,,,1\n".as_bytes()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn sigma_levels_are_sorted_and_populated(sigma in 1.05f64..3.0, n_max in 1u64..3000) {
            let groups = gen_sigma_skew(&SkewSpec { sigma, n_max, total_budget: None }).unwrap();
            proptest::prop_assert!(groups.windows(2).all(|w| w[0].size_bytes >= w[1].size_bytes));
            let mut level = 0i32;
            let mut idx = 0usize;
            while (n_max as f64) / sigma.powi(level) >= 1.0 {
                let target = sigma.powi(level);
                let count = round_half_up(target) as usize;
                proptest::prop_assert!((count as f64 - target).abs() <= 0.5 + 1e-9);
                idx += count;
                level += 1;
            }
            proptest::prop_assert_eq!(idx, groups.len());
        }

        #[test]
        fn zipf_is_non_increasing(s in 0.1f64..3.0, distinct in 1u64..300, tuples in 1u64..100_000) {
            let q = zipf_quotas(&ZipfSpec { s, distinct_keys: distinct, tuples }).unwrap();
            proptest::prop_assert!(q.windows(2).all(|w| w[0] >= w[1]));
            proptest::prop_assert!(q.iter().sum::<u64>() <= tuples);
        }
    }
}
