//! Experiment configuration. JSON, one object per experiment; every field
//! except `seed`, `workload` and `reduce_cost` has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{
    ClusterSpec, CostKind, CostModel, JobSpec, MapSplit, NearestFitConfig, Partitioner,
};
use crate::error::{Error, Result};
use crate::indicators::IndicatorKind;
use crate::workload::{
    gen_matmult_products, gen_sigma_skew, gen_zipf_join, gen_zipf_sampled, Balance,
    DensityLayout, JoinKey, SkewSpec, Workload, ZipfSpec,
};

fn one() -> u32 {
    1
}

fn one_u64() -> u64 {
    1
}

fn four() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum WorkloadConfig {
    /// `n_max` counts units of `unit_bytes` bytes.
    SigmaSkew {
        sigma: f64,
        n_max: u64,
        #[serde(default)]
        total_budget: Option<u64>,
        #[serde(default = "one_u64")]
        unit_bytes: u64,
        #[serde(default = "four")]
        map_tasks: usize,
    },
    ZipfJoin {
        left: ZipfSpec,
        #[serde(default)]
        right: Option<ZipfSpec>,
        #[serde(default = "one_u64")]
        tuple_bytes: u64,
        #[serde(default = "four")]
        map_tasks: usize,
        /// Seeded sampling instead of deterministic quotas (left side only).
        #[serde(default)]
        sampled: bool,
    },
    Matmult {
        blocks: u32,
        balance: Balance,
        layout: DensityLayout,
        side: u64,
        #[serde(default = "one_u64")]
        entry_bytes: u64,
        #[serde(default = "four")]
        map_tasks: usize,
    },
    /// A workload CSV written by `skewsim gen`.
    File { path: PathBuf },
}

impl WorkloadConfig {
    pub fn generate(&self, reducers: u32, seed: u64, base_dir: Option<&Path>) -> Result<Workload> {
        match self {
            WorkloadConfig::SigmaSkew {
                sigma,
                n_max,
                total_budget,
                unit_bytes,
                map_tasks,
            } => {
                let mut groups = gen_sigma_skew(&SkewSpec {
                    sigma: *sigma,
                    n_max: *n_max,
                    total_budget: *total_budget,
                })?;
                for g in &mut groups {
                    g.size_bytes *= unit_bytes;
                }
                Ok(Workload::from_groups(&groups, *map_tasks))
            }
            WorkloadConfig::ZipfJoin {
                left,
                right,
                tuple_bytes,
                map_tasks,
                sampled,
            } => {
                let keys = if *sampled {
                    gen_zipf_sampled(left, seed)?
                        .into_iter()
                        .map(|(key, n)| JoinKey { key, left: n, right: 1 })
                        .collect()
                } else {
                    gen_zipf_join(left, right.as_ref(), seed)?
                };
                Ok(Workload::from_join(&keys, *tuple_bytes, *map_tasks))
            }
            WorkloadConfig::Matmult {
                blocks,
                balance,
                layout,
                side,
                entry_bytes,
                map_tasks,
            } => {
                let w = gen_matmult_products(*blocks, *balance, *layout, *side, reducers, seed)?;
                Ok(Workload::from_matmult(&w, *entry_bytes, *map_tasks))
            }
            WorkloadConfig::File { path } => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Workload::read_csv(std::fs::File::open(path)?)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let map_tasks = match self {
            WorkloadConfig::SigmaSkew {
                sigma,
                n_max,
                unit_bytes,
                map_tasks,
                ..
            } => {
                if !(*sigma > 1.0 && sigma.is_finite()) {
                    return Err(Error::field("workload.sigma", format!("must be > 1, got {sigma}")));
                }
                if *n_max == 0 {
                    return Err(Error::field("workload.n_max", "must be >= 1"));
                }
                if *unit_bytes == 0 {
                    return Err(Error::field("workload.unit_bytes", "must be >= 1"));
                }
                *map_tasks
            }
            WorkloadConfig::ZipfJoin { tuple_bytes, map_tasks, .. } => {
                if *tuple_bytes == 0 {
                    return Err(Error::field("workload.tuple_bytes", "must be >= 1"));
                }
                *map_tasks
            }
            WorkloadConfig::Matmult { entry_bytes, map_tasks, .. } => {
                if *entry_bytes == 0 {
                    return Err(Error::field("workload.entry_bytes", "must be >= 1"));
                }
                *map_tasks
            }
            WorkloadConfig::File { .. } => 1,
        };
        if map_tasks == 0 {
            return Err(Error::field("workload.map_tasks", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub pairs_per_task: u64,
    pub bytes_per_pair: u64,
    pub cost: CostModel,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            pairs_per_task: 1000,
            bytes_per_pair: 100,
            cost: CostModel::polynomial(0.01, 1.0),
        }
    }
}

/// Re-runs the experiment once per value, with `field` (a dotted path
/// into this configuration) set to that value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub field: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub map: MapConfig,
    pub reduce_cost: CostModel,
    /// When set, the reduce cost coefficient is rescaled so the expected
    /// reduce work per busy slot is this many ms.
    #[serde(default)]
    pub normalize_phase_ms: Option<u64>,
    #[serde(default = "one")]
    pub reducers: u32,
    #[serde(default)]
    pub partitioner: Partitioner,
    #[serde(default)]
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub shuffle_rate: Option<f64>,
    #[serde(default = "default_indicators")]
    pub indicators: Vec<IndicatorKind>,
    #[serde(default)]
    pub nearestfit: NearestFitConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Directory that relative workload paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_indicators() -> Vec<IndicatorKind> {
    IndicatorKind::PAPER_SET.to_vec()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("config line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        if self.reducers == 0 {
            return Err(Error::field("reducers", "must be >= 1"));
        }
        self.cluster.validate()?;
        self.reduce_cost.validate("reduce_cost")?;
        self.map.cost.validate("map.cost")?;
        if self.map.pairs_per_task == 0 {
            return Err(Error::field("map.pairs_per_task", "must be >= 1"));
        }
        if let Some(rate) = self.shuffle_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::field("shuffle_rate", "must be > 0"));
            }
        }
        if self.normalize_phase_ms == Some(0) {
            return Err(Error::field("normalize_phase_ms", "must be > 0"));
        }
        if self.indicators.is_empty() {
            return Err(Error::field("indicators", "must name at least one indicator"));
        }
        self.nearestfit.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::field("sweep.values", "must not be empty"));
            }
            for v in &sweep.values {
                self.with_override(&sweep.field, v.clone())?;
            }
        }
        Ok(())
    }

    /// Copy with the dotted `field` replaced by `value`, re-validated.
    pub fn with_override(&self, field: &str, value: Value) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        let mut slot = &mut doc;
        for part in field.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::field(field, "no such configuration field"))?;
        }
        *slot = value;
        let mut cfg: Self = serde_json::from_value(doc)
            .map_err(|e| Error::field(field, e.to_string()))?;
        cfg.sweep = None;
        cfg.base_dir = self.base_dir.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Generates the workload and assembles the job.
    pub fn build_job(&self) -> Result<(JobSpec, ClusterSpec)> {
        let workload = self
            .workload
            .generate(self.reducers, self.seed, self.base_dir.as_deref())?;
        let partitioner = match &workload.assignment {
            Some(tasks) => Partitioner::Explicit {
                tasks: tasks.clone(),
            },
            None => self.partitioner.clone(),
        };
        let mut job = JobSpec {
            map_splits: vec![
                MapSplit {
                    pairs: self.map.pairs_per_task,
                    bytes_per_pair: self.map.bytes_per_pair,
                };
                workload.map_tasks
            ],
            map_cost: self.map.cost.clone(),
            reduce_cost: self.reduce_cost.clone(),
            intermediate_keys: workload.keys,
            reducers: self.reducers,
            partitioner,
            shuffle_rate: self.shuffle_rate,
        };
        if let Some(target) = self.normalize_phase_ms {
            let busy = self.reducers.min(self.cluster.parallelism() as u32).max(1);
            job.reduce_cost = normalized(&job, target as f64 * busy as f64)?;
        }
        job.validate()?;
        Ok((job, self.cluster))
    }
}

/// `job.reduce_cost` rescaled so that its noise-free total is `total_ms`.
fn normalized(job: &JobSpec, total_ms: f64) -> Result<CostModel> {
    let sum: f64 = job
        .intermediate_keys
        .iter()
        .map(|k| job.reduce_cost.expected(k.size_bytes(), k.factors))
        .sum::<Result<f64>>()?;
    if sum <= 0.0 {
        return Ok(job.reduce_cost.clone());
    }
    let factor = total_ms / sum;
    let mut model = job.reduce_cost.clone();
    match &mut model.kind {
        CostKind::Polynomial { coefficient, .. } | CostKind::Product { coefficient } => {
            *coefficient *= factor
        }
        CostKind::Table { points } => {
            for p in points {
                p.1 *= factor;
            }
        }
    }
    Ok(model)
}
