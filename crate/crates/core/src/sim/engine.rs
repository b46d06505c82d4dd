use crate::domain::{mix_seed, ClusterSpec, JobSpec, KeyGroup, SimTime};
use crate::error::{Error, Result};

use super::partition::assign_tasks;
use super::trace::{
    EventKind, ExecutionTrace, FunctionRecord, PhaseBoundaries, TaskKind, TaskTimeline,
    TraceEvent,
};

const MAP_SALT: u64 = 0x6d61_7000;
const REDUCE_SALT: u64 = 0x7265_6400;
const PARTITION_SALT: u64 = 0x7061_7274;

fn whole_ms(cost: f64) -> u64 {
    (cost + 0.5).floor() as u64
}

/// Greedy FIFO slot pool: each task takes the slot that frees up first.
#[derive(Clone, Debug)]
pub struct SlotPool {
    free_at: Vec<SimTime>,
}

impl SlotPool {
    pub fn new(slots: usize, at: SimTime) -> Self {
        Self {
            free_at: vec![at; slots],
        }
    }

    /// Slot and start time for a task ready at `ready`.
    pub fn acquire(&self, ready: SimTime) -> (usize, SimTime) {
        let (slot, free) = self
            .free_at
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
            .map(|(i, t)| (i, *t))
            .expect("pool has at least one slot");
        (slot, free.max(ready))
    }

    pub fn release(&mut self, slot: usize, at: SimTime) {
        self.free_at[slot] = at;
    }
}

/// Runs `spec` on `cluster`. Deterministic in `(spec, cluster, seed)`.
pub fn run_job(spec: &JobSpec, cluster: &ClusterSpec, seed: u64) -> Result<ExecutionTrace> {
    spec.validate()?;
    if cluster.parallelism() == 0 {
        return Err(Error::invalid("cluster has zero task slots"));
    }
    cluster.validate()?;
    let slots_per_worker = cluster.slots_per_worker;
    let parallelism = cluster.parallelism();
    let mut events = Vec::new();

    // Map phase.
    let map_count = spec.map_splits.len();
    let mut emitted = vec![0u64; map_count];
    for key in &spec.intermediate_keys {
        for (acc, b) in emitted.iter_mut().zip(&key.map_sizes) {
            *acc += b;
        }
    }
    let mut pool = SlotPool::new(parallelism, SimTime::ZERO);
    let mut maps = Vec::with_capacity(map_count);
    for (j, split) in spec.map_splits.iter().enumerate() {
        let (slot, start) = pool.acquire(SimTime::ZERO);
        events.push(TraceEvent {
            t: start,
            kind: EventKind::MapTaskStart,
            task: j as u32,
            key: None,
            size_bytes: split.bytes(),
            elapsed_ms: 0,
        });
        let mut clock = start;
        let mut functions = Vec::with_capacity(split.pairs as usize);
        for pair in 0..split.pairs {
            let salt = MAP_SALT ^ ((j as u64) << 40) ^ pair;
            let ms = whole_ms(
                spec.map_cost
                    .eval(split.bytes_per_pair, None, mix_seed(seed, salt))?,
            );
            let record = FunctionRecord {
                key: crate::domain::KeyId(pair),
                size_bytes: split.bytes_per_pair,
                start: clock,
                end: clock + ms,
            };
            clock = record.end;
            events.push(TraceEvent {
                t: record.end,
                kind: EventKind::MapFunctionEnd,
                task: j as u32,
                key: None,
                size_bytes: record.size_bytes,
                elapsed_ms: ms,
            });
            functions.push(record);
        }
        let work_end = clock;
        let end = work_end + spec.shuffle_time(emitted[j]);
        events.push(TraceEvent {
            t: end,
            kind: EventKind::MapTaskEnd,
            task: j as u32,
            key: None,
            size_bytes: split.bytes(),
            elapsed_ms: end - start,
        });
        pool.release(slot, end);
        maps.push(TaskTimeline {
            task_id: j as u32,
            kind: TaskKind::Map,
            worker: slot as u32 / slots_per_worker,
            slot: slot as u32,
            start,
            work_start: work_end,
            end,
            input_bytes: split.bytes(),
            functions,
        });
    }
    let map_end = maps.iter().map(|m| m.end).max().unwrap_or(SimTime::ZERO);

    // Partitioning.
    let groups: Vec<KeyGroup> = spec.intermediate_keys.iter().map(|k| k.group()).collect();
    let weights = spec
        .intermediate_keys
        .iter()
        .map(|k| spec.reduce_cost.expected(k.size_bytes(), k.factors))
        .collect::<Result<Vec<f64>>>()?;
    let assignment = assign_tasks(
        &groups,
        &weights,
        spec.reducers,
        &spec.partitioner,
        mix_seed(seed, PARTITION_SALT),
    )?;
    let reducers = spec.reducers as usize;
    let mut per_task: Vec<Vec<usize>> = vec![Vec::new(); reducers];
    for (idx, &task) in assignment.iter().enumerate() {
        per_task[task as usize].push(idx);
    }
    for keys in &mut per_task {
        keys.sort_by_key(|&idx| spec.intermediate_keys[idx].key);
    }
    let input_bytes: Vec<u64> = per_task
        .iter()
        .map(|keys| keys.iter().map(|&i| groups[i].size_bytes).sum())
        .collect();

    // Shuffle barrier for the first wave.
    let first_wave = reducers.min(parallelism);
    let reduce_start = map_end
        + (0..first_wave)
            .map(|i| spec.shuffle_time(input_bytes[i]))
            .max()
            .unwrap_or(0);

    let mut pool = SlotPool::new(parallelism, map_end);
    let mut reduces = Vec::with_capacity(reducers);
    for (i, keys) in per_task.iter().enumerate() {
        let (slot, start) = pool.acquire(map_end);
        let fetch = spec.shuffle_time(input_bytes[i]);
        let work_start = if i < first_wave {
            reduce_start
        } else {
            start + fetch
        };
        events.push(TraceEvent {
            t: start,
            kind: EventKind::ReduceTaskStart,
            task: i as u32,
            key: None,
            size_bytes: input_bytes[i],
            elapsed_ms: fetch,
        });
        let mut clock = work_start;
        let mut functions = Vec::with_capacity(keys.len());
        for &idx in keys {
            let key = &spec.intermediate_keys[idx];
            let size = groups[idx].size_bytes;
            let ms = whole_ms(spec.reduce_cost.eval(
                size,
                key.factors,
                mix_seed(seed, REDUCE_SALT ^ key.key.0),
            )?);
            let record = FunctionRecord {
                key: key.key,
                size_bytes: size,
                start: clock,
                end: clock + ms,
            };
            clock = record.end;
            events.push(TraceEvent {
                t: record.end,
                kind: EventKind::ReduceFunctionEnd,
                task: i as u32,
                key: Some(key.key),
                size_bytes: size,
                elapsed_ms: ms,
            });
            functions.push(record);
        }
        events.push(TraceEvent {
            t: clock,
            kind: EventKind::ReduceTaskEnd,
            task: i as u32,
            key: None,
            size_bytes: input_bytes[i],
            elapsed_ms: clock - start,
        });
        pool.release(slot, clock);
        reduces.push(TaskTimeline {
            task_id: i as u32,
            kind: TaskKind::Reduce,
            worker: slot as u32 / slots_per_worker,
            slot: slot as u32,
            start,
            work_start,
            end: clock,
            input_bytes: input_bytes[i],
            functions,
        });
    }
    let job_end = reduces
        .iter()
        .map(|r| r.end)
        .max()
        .unwrap_or(reduce_start)
        .max(reduce_start);

    events.sort_by_key(|e| e.t);

    Ok(ExecutionTrace {
        job: spec.clone(),
        cluster: *cluster,
        seed,
        assignment,
        maps,
        reduces,
        phases: PhaseBoundaries {
            map_end,
            reduce_start,
            job_end,
        },
        events,
    })
}
