use std::collections::BTreeMap;

use proptest::prelude::*;
use skewsim::domain::{ClusterSpec, CostModel, JobSpec, MapSplit, Partitioner};
use skewsim::sim::{run_job, EventKind, ExecutionTrace, TaskKind};
use skewsim::workload::{gen_sigma_skew, SkewSpec, Workload};

fn job(sigma: f64, n_max: u64, reducers: u32, exponent: f64) -> JobSpec {
    let groups = gen_sigma_skew(&SkewSpec {
        sigma,
        n_max,
        total_budget: None,
    })
    .unwrap();
    let workload = Workload::from_groups(&groups, 3);
    JobSpec {
        map_splits: vec![
            MapSplit {
                pairs: 20,
                bytes_per_pair: 10,
            };
            3
        ],
        map_cost: CostModel::polynomial(0.5, 1.0),
        reduce_cost: CostModel::polynomial(0.05, exponent),
        intermediate_keys: workload.keys,
        reducers,
        partitioner: Partitioner::Hash,
        shuffle_rate: Some(4.0),
    }
}

fn check_invariants(trace: &ExecutionTrace) {
    let job = &trace.job;
    // every key is reduced exactly once, in the task it was assigned to
    let mut seen = BTreeMap::new();
    for e in trace.events.iter().filter(|e| e.kind == EventKind::ReduceFunctionEnd) {
        *seen.entry(e.key.unwrap()).or_insert(0) += 1;
    }
    assert_eq!(seen.len(), job.intermediate_keys.len());
    assert!(seen.values().all(|&n| n == 1));

    assert!(trace.events.windows(2).all(|w| w[0].t <= w[1].t));
    assert!(trace.phases.map_end <= trace.phases.reduce_start);
    assert!(trace.phases.reduce_start <= trace.phases.job_end);

    let total: u64 = job.intermediate_keys.iter().map(|k| k.size_bytes()).sum();
    assert_eq!(trace.reduce_input_bytes().iter().sum::<u64>(), total);

    for task in trace.tasks() {
        // functions run back to back; a map task then shuffles locally
        let mut clock = match task.kind {
            TaskKind::Map => task.start,
            TaskKind::Reduce => task.work_start,
        };
        for f in &task.functions {
            assert_eq!(f.start, clock);
            clock = f.end;
        }
        if task.kind == TaskKind::Map {
            assert_eq!(task.work_start, clock);
            assert!(task.end >= clock);
        } else {
            assert_eq!(task.end, clock);
            assert!(task.work_start >= trace.phases.reduce_start);
            assert_eq!(task.functions.iter().map(|f| f.size_bytes).sum::<u64>(), task.input_bytes);
        }
    }

    // no slot runs two tasks at once
    let mut by_slot: BTreeMap<(bool, u32), Vec<(u64, u64)>> = BTreeMap::new();
    for task in trace.tasks() {
        by_slot
            .entry((task.kind == TaskKind::Map, task.slot))
            .or_default()
            .push((task.start.0, task.end.0));
    }
    for spans in by_slot.values_mut() {
        spans.sort_unstable();
        assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0), "{spans:?}");
    }
}

#[test]
fn trace_is_deterministic_per_seed() {
    let job = job(1.4, 300, 5, 2.0);
    let cluster = ClusterSpec {
        workers: 2,
        slots_per_worker: 2,
    };
    let a = run_job(&job, &cluster, 7).unwrap();
    let b = run_job(&job, &cluster, 7).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    check_invariants(&a);
}

#[test]
fn trace_json_round_trips() {
    let job = job(2.0, 64, 2, 1.0);
    let trace = run_job(&job, &ClusterSpec::default(), 1).unwrap();
    let text = serde_json::to_string(&trace).unwrap();
    let back: ExecutionTrace = serde_json::from_str(&text).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn events_csv_has_one_row_per_event() {
    let trace = run_job(&job(2.0, 16, 2, 2.0), &ClusterSpec::default(), 3).unwrap();
    let mut buf = Vec::new();
    trace.write_events_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), trace.events.len() + 1);
    assert!(text.starts_with("kind,task,key,size,t_ms,elapsed_ms"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_hold_for_random_jobs(
        sigma in 1.1f64..3.0,
        n_max in 4u64..400,
        reducers in 1u32..9,
        workers in 1u32..4,
        slots in 1u32..3,
        exponent in 0.5f64..3.0,
        seed in 0u64..1000,
    ) {
        let cluster = ClusterSpec { workers, slots_per_worker: slots };
        let trace = run_job(&job(sigma, n_max, reducers, exponent), &cluster, seed).unwrap();
        check_invariants(&trace);
    }
}
