//! Generators and oracles shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use rawq_core::agg::AggFunction;
use rawq_core::executor::{Data, Event, ExecResult, TaskGraph};
use rawq_core::index::{partition_fn, IndexSource, LearnedIndex, PartitionRange};
use rawq_core::planner::{EnginePlan, OperatorGroup, PhysicalOp, PhysicalPlan};
use rawq_core::sql::{BoundExpr, ColumnRef};
use rawq_core::storage::{Catalog, Field};
use rawq_core::udf::UdfRegistry;
use rawq_core::value::{DataType, Value};
use rawq_core::{Engine, ExecConfig};

pub fn tpch_engine(dir: &Path, workers: usize, partition_size: usize) -> Engine {
    let catalog = Catalog::from_config_file(&dir.join("catalog.toml")).unwrap();
    Engine::new(
        Arc::new(catalog),
        Arc::new(UdfRegistry::with_suite()),
        ExecConfig {
            workers,
            partition_size,
            ..ExecConfig::default()
        },
    )
}

// ---- learned index ----

/// Disjoint, ordered ranges with gaps, ordinals 1..=n.
pub fn random_index(rng: &mut impl Rng) -> LearnedIndex {
    let n = rng.random_range(1..=40u32);
    let mut start = rng.random_range(-1000..1000i64);
    let mut ranges = Vec::with_capacity(n as usize);
    for ordinal in 1..=n {
        let len = rng.random_range(0..50i64);
        ranges.push(PartitionRange::new(start, start + len, ordinal).unwrap());
        start += len + rng.random_range(1..20i64);
    }
    LearnedIndex::from_ranges(ranges, IndexSource::default(), DataType::Int64).unwrap()
}

/// The index as a literal sum of partition functions.
pub fn literal_probe(idx: &LearnedIndex, key: i64) -> u32 {
    idx.ranges()
        .iter()
        .map(|r| partition_fn(r.begin, r.end, r.partition, key).unwrap())
        .sum()
}

/// Keys in and around the index's span.
pub fn probe_key(idx: &LearnedIndex, rng: &mut impl Rng) -> i64 {
    let lo = idx.ranges().first().unwrap().begin;
    let hi = idx.ranges().last().unwrap().end;
    rng.random_range(lo - 30..=hi + 30)
}

// ---- physical plans ----

fn col(name: &str) -> BoundExpr {
    BoundExpr::Column(ColumnRef {
        name: name.to_string(),
        table: 0,
        data_type: DataType::Int64,
    })
}

/// A random operator DAG: distinct random keys, inputs always emitted
/// before consumers, split into contiguous groups at random.
pub fn random_physical_plan(rng: &mut impl Rng) -> PhysicalPlan {
    let n = rng.random_range(1..=24usize);
    let mut pool: Vec<u32> = (1..=1000).collect();
    pool.shuffle(rng);
    let keys = &pool[..n];
    let mut ops: Vec<PhysicalOp> = Vec::with_capacity(n);
    for (i, &key) in keys.iter().enumerate() {
        let earlier = &keys[..i];
        let pick = |rng: &mut dyn RngCore| earlier[rng.random_range(0..earlier.len())];
        let choice = if earlier.is_empty() { 0 } else { rng.random_range(0..8) };
        let op = match choice {
            0 => PhysicalOp::scan(
                key,
                &format!("t{key}"),
                vec![Field::new(format!("c{key}"), DataType::Int64)],
                rng.random_bool(0.5).then_some("c"),
            ),
            1 => PhysicalOp::filter(key, pick(rng), vec![]),
            2 => PhysicalOp::project(key, pick(rng), vec![(format!("p{key}"), col("x"))]),
            3 => {
                let side = [None, Some("left"), Some("right")][rng.random_range(0..3)];
                PhysicalOp::join(key, pick(rng), pick(rng), "a", "b", side)
            }
            4 => PhysicalOp::aggregate(key, pick(rng), vec!["g".into()], vec![]),
            5 => PhysicalOp::sort(key, pick(rng), vec![("s".into(), rng.random_bool(0.5))]),
            6 => PhysicalOp::limit(key, pick(rng), rng.random_range(0..100), rng.random_bool(0.5)),
            _ => PhysicalOp::filter(key, pick(rng), vec![]),
        };
        ops.push(op);
    }
    let mut groups = Vec::new();
    let mut current = Vec::new();
    for op in ops {
        current.push(op);
        if rng.random_bool(0.3) {
            groups.push(OperatorGroup {
                ops: std::mem::take(&mut current),
            });
        }
    }
    if !current.is_empty() {
        groups.push(OperatorGroup { ops: current });
    }
    PhysicalPlan { groups }
}

/// Keys, order and dependencies survive conversion unchanged.
pub fn check_plan_fidelity(pp: &PhysicalPlan, ep: &EnginePlan) -> Result<(), String> {
    let phys: Vec<&PhysicalOp> = pp.ops().collect();
    if phys.len() != ep.ops.len() {
        return Err(format!("{} ops became {}", phys.len(), ep.ops.len()));
    }
    let mut a: Vec<u32> = phys.iter().map(|o| o.key).collect();
    let mut b: Vec<u32> = ep.ops.iter().map(|o| o.key).collect();
    if a != b {
        return Err(format!("key order {a:?} vs {b:?}"));
    }
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err("key multiset differs".into());
    }
    let mut seen = BTreeSet::new();
    for (p, e) in phys.iter().zip(&ep.ops) {
        if p.children != e.children {
            return Err(format!("children of {} changed", p.key));
        }
        if e.inputs.len() != e.children.len() {
            return Err(format!("inputs of {} not resolved", p.key));
        }
        if let Some(c) = e.children.iter().find(|c| !seen.contains(*c)) {
            return Err(format!("{} depends on later/unknown {c}", p.key));
        }
        if e.kind.name()
            != match p.op_type.as_str() {
                "scan" => "read_table",
                "filter" => "filters",
                "project" => "select_columns",
                "join" => "merge_join",
                "aggregate" => "groupby_agg",
                "sort" => "sort_values",
                "limit" => "head",
                _ => "apply_udf",
            }
        {
            return Err(format!("{} mapped to {}", p.op_type, e.kind));
        }
        seen.insert(p.key);
    }
    Ok(())
}

// ---- task graphs ----

/// A random DAG whose tasks each emit one integer derived from their id
/// and the inputs they choose to read. Returns the graph and the expected
/// value of every task.
pub fn random_dag(rng: &mut impl Rng) -> (TaskGraph, Vec<i64>) {
    let n = rng.random_range(1..=30usize);
    let mut g = TaskGraph::new();
    let mut expected = Vec::with_capacity(n);
    for id in 0..n {
        let k = if id == 0 { 0 } else { rng.random_range(0..=id.min(4)) };
        let mut inputs: Vec<usize> = (0..id).collect::<Vec<_>>();
        inputs.shuffle(rng);
        inputs.truncate(k);
        inputs.sort_unstable();
        let reads: Vec<bool> = inputs.iter().map(|_| rng.random_bool(0.8)).collect();
        let mut want = id as i64 * 1_000_003;
        for (i, &inp) in inputs.iter().enumerate() {
            if reads[i] {
                want = want.wrapping_mul(31).wrapping_add(expected[inp]);
            }
        }
        expected.push(want);
        let reads2 = reads.clone();
        g.add(format!("t{id}"), id as u32, inputs, move |ctx| {
            let mut v = id as i64 * 1_000_003;
            for (i, &r) in reads2.iter().enumerate() {
                if r {
                    let rows = ctx.fetch_rows(i)?;
                    v = v.wrapping_mul(31).wrapping_add(rows[0][0].as_key().unwrap());
                }
            }
            Ok(Data::rows(vec![vec![Value::Int(v)]]))
        });
    }
    (g, expected)
}

/// Every task started and finished exactly once, after its inputs, and
/// every consumed output was released exactly once.
pub fn check_log(g_inputs: &[Vec<usize>], res: &ExecResult) -> Result<(), String> {
    let n = g_inputs.len();
    let mut started = vec![0; n];
    let mut finished_at = vec![None; n];
    let mut released = vec![0; n];
    for (pos, e) in res.log.iter().enumerate() {
        match *e {
            Event::Start { task, .. } => {
                started[task] += 1;
                if let Some(i) = g_inputs[task].iter().find(|i| finished_at[**i].is_none()) {
                    return Err(format!("task {task} started before input {i} finished"));
                }
            }
            Event::Finish { task, .. } => {
                if started[task] != 1 {
                    return Err(format!("task {task} finished without starting"));
                }
                if finished_at[task].replace(pos).is_some() {
                    return Err(format!("task {task} finished twice"));
                }
            }
            Event::Release { task } => released[task] += 1,
            Event::Fetch { .. } => {}
        }
    }
    let consumed: BTreeSet<usize> = g_inputs.iter().flatten().copied().collect();
    for t in 0..n {
        if started[t] != 1 || finished_at[t].is_none() {
            return Err(format!("task {t} ran {} times", started[t]));
        }
        let want = usize::from(consumed.contains(&t));
        if released[t] != want {
            return Err(format!("task {t} released {} times", released[t]));
        }
    }
    Ok(())
}

// ---- aggregation ----

/// Straight single-threaded group-by.
pub fn agg_oracle(records: &[(i64, f64)], f: AggFunction) -> BTreeMap<i64, f64> {
    let mut groups: HashMap<i64, Vec<f64>> = HashMap::new();
    for &(k, v) in records {
        groups.entry(k).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|(k, mut vs)| {
            let out = match f {
                AggFunction::Count => vs.len() as f64,
                AggFunction::Sum => vs.iter().sum(),
                AggFunction::Min => vs.iter().copied().fold(f64::INFINITY, f64::min),
                AggFunction::Max => vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                AggFunction::Avg => vs.iter().sum::<f64>() / vs.len() as f64,
                AggFunction::Median => {
                    vs.sort_by(f64::total_cmp);
                    vs[(vs.len() - 1) / 2]
                }
            };
            (k, out)
        })
        .collect()
}

pub fn agg_maps_match(got: &BTreeMap<i64, f64>, want: &BTreeMap<i64, f64>) -> bool {
    got.len() == want.len()
        && got.iter().zip(want).all(|((k1, a), (k2, b))| {
            k1 == k2 && (a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()))
        })
}

/// Payload values: small integers so every summation order is exact.
pub fn payload(keys: &[i64]) -> Vec<(i64, f64)> {
    keys.iter()
        .enumerate()
        .map(|(i, &k)| (k, ((i as u64 * 7919) % 10007) as f64))
        .collect()
}
