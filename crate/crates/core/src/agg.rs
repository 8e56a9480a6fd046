//! Parallel group-by aggregation over `(key, value)` records.
//!
//! Seven strategies share one contract: the result equals single-threaded
//! aggregation. They differ in how threads share hash tables:
//!
//! | strategy                  | scan phase                                        |
//! |---------------------------|---------------------------------------------------|
//! | `shared`                  | one striped-lock table updated by every thread    |
//! | `independent`             | private table per thread, merged at the end       |
//! | `partition_and_aggregate` | hash-partition into a grid, one thread per bucket |
//! | `plat`                    | bounded private table, overflow partitioned       |
//! | `hybrid`                  | small private table flushed into a shared one     |
//! | `contention_local`        | hot keys cloned into thread-local tables          |
//! | `contention_global`       | hot keys spread over several shared copies        |
//!
//! Strategies that split a group's values across tables cannot compute
//! holistic functions; see [`supports`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::{Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggClass {
    Distributive,
    Algebraic,
    Holistic,
}

impl fmt::Display for AggClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggClass::Distributive => "distributive",
            AggClass::Algebraic => "algebraic",
            AggClass::Holistic => "holistic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunction {
    Count,
    Sum,
    Min,
    Max,
    Avg,
    /// Lower median for even group sizes.
    Median,
}

impl AggFunction {
    pub const ALL: [AggFunction; 6] = [
        AggFunction::Count,
        AggFunction::Sum,
        AggFunction::Min,
        AggFunction::Max,
        AggFunction::Avg,
        AggFunction::Median,
    ];

    pub fn class(self) -> AggClass {
        match self {
            AggFunction::Count | AggFunction::Sum | AggFunction::Min | AggFunction::Max => {
                AggClass::Distributive
            }
            AggFunction::Avg => AggClass::Algebraic,
            AggFunction::Median => AggClass::Holistic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggFunction::Count => "count",
            AggFunction::Sum => "sum",
            AggFunction::Min => "min",
            AggFunction::Max => "max",
            AggFunction::Avg => "avg",
            AggFunction::Median => "median",
        }
    }

    pub fn parse(name: &str) -> Option<AggFunction> {
        AggFunction::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for AggFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Shared,
    Independent,
    PartitionAndAggregate,
    Plat,
    Hybrid,
    ContentionLocal,
    ContentionGlobal,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Shared,
        Strategy::Independent,
        Strategy::PartitionAndAggregate,
        Strategy::Plat,
        Strategy::Hybrid,
        Strategy::ContentionLocal,
        Strategy::ContentionGlobal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Shared => "shared",
            Strategy::Independent => "independent",
            Strategy::PartitionAndAggregate => "partition_and_aggregate",
            Strategy::Plat => "plat",
            Strategy::Hybrid => "hybrid",
            Strategy::ContentionLocal => "contention_local",
            Strategy::ContentionGlobal => "contention_global",
        }
    }
}

impl Default for Strategy {
    fn default() -> Strategy {
        Strategy::PartitionAndAggregate
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = AggError;

    fn from_str(s: &str) -> Result<Strategy, AggError> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| AggError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggError {
    #[error("strategy {strategy} does not support {class} aggregation")]
    UnsupportedAggregation { strategy: Strategy, class: AggClass },
    #[error("thread count must be at least 1")]
    ZeroThreads,
    #[error("unknown aggregation strategy `{0}`")]
    UnknownStrategy(String),
}

/// Capability matrix: which function classes each strategy computes
/// exactly.
pub fn supports(strategy: Strategy, function: AggFunction) -> bool {
    supports_class(strategy, function.class())
}

pub fn supports_class(strategy: Strategy, class: AggClass) -> bool {
    match class {
        AggClass::Distributive | AggClass::Algebraic => true,
        AggClass::Holistic => matches!(
            strategy,
            Strategy::Shared | Strategy::PartitionAndAggregate
        ),
    }
}

/// Tunables. Defaults: PLAT local capacity 1024, hybrid local capacity 64,
/// contention window 1024 records with a 50% hot threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggConfig {
    pub plat_capacity: usize,
    pub hybrid_capacity: usize,
    pub contention_window: usize,
    pub hot_fraction: f64,
}

impl Default for AggConfig {
    fn default() -> AggConfig {
        AggConfig {
            plat_capacity: 1024,
            hybrid_capacity: 64,
            contention_window: 1024,
            hot_fraction: 0.5,
        }
    }
}

/// Counters describing which internal paths a run took.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AggStats {
    /// PLAT records routed to the partitioned overflow path.
    pub overflow_records: u64,
    /// Hybrid local-table flushes.
    pub flushes: u64,
    /// Distinct keys cloned by contention detection.
    pub hot_keys: u64,
}

/// Fixed-size summary for distributive and algebraic functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partial {
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl Partial {
    pub fn of(v: f64) -> Partial {
        Partial {
            count: 1,
            sum: v,
            min: v,
            max: v,
        }
    }

    /// An avg partial carrying a `(sum, count)` pair.
    pub fn sum_count(sum: f64, count: u64) -> Partial {
        Partial {
            count,
            sum,
            min: f64::NAN,
            max: f64::NAN,
        }
    }
}

trait State: Send + Sized {
    fn new(v: f64) -> Self;
    fn update(&mut self, v: f64);
    fn merge(&mut self, other: Self);
    fn finish(self, f: AggFunction) -> f64;
}

impl State for Partial {
    fn new(v: f64) -> Self {
        Partial::of(v)
    }

    fn update(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn merge(&mut self, o: Partial) {
        self.count += o.count;
        self.sum += o.sum;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }

    fn finish(self, f: AggFunction) -> f64 {
        match f {
            AggFunction::Count => self.count as f64,
            AggFunction::Sum => self.sum,
            AggFunction::Min => self.min,
            AggFunction::Max => self.max,
            AggFunction::Avg => self.sum / self.count as f64,
            AggFunction::Median => unreachable!("median needs every value"),
        }
    }
}

/// Every value of a group, for holistic functions.
struct Values(Vec<f64>);

impl State for Values {
    fn new(v: f64) -> Self {
        Values(vec![v])
    }

    fn update(&mut self, v: f64) {
        self.0.push(v);
    }

    fn merge(&mut self, mut o: Values) {
        self.0.append(&mut o.0);
    }

    fn finish(mut self, f: AggFunction) -> f64 {
        debug_assert_eq!(f, AggFunction::Median);
        self.0.sort_by(f64::total_cmp);
        self.0[(self.0.len() - 1) / 2]
    }
}

type Table<S> = HashMap<i64, S>;

fn upsert<S: State>(table: &mut Table<S>, key: i64, v: f64) {
    match table.get_mut(&key) {
        Some(s) => s.update(v),
        None => {
            table.insert(key, S::new(v));
        }
    }
}

fn merge_into<S: State>(table: &mut Table<S>, key: i64, s: S) {
    match table.get_mut(&key) {
        Some(t) => t.merge(s),
        None => {
            table.insert(key, s);
        }
    }
}

fn mix(key: i64) -> u64 {
    // splitmix64 finalizer
    let mut z = key as u64;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn bucket(key: i64, n: usize) -> usize {
    (mix(key) % n as u64) as usize
}

const STRIPES: usize = 256;

/// One logical hash table with per-stripe locks; updates to a key are
/// linearizable.
struct SharedTable<S> {
    stripes: Vec<Mutex<Table<S>>>,
}

impl<S: State> SharedTable<S> {
    fn new() -> Self {
        SharedTable {
            stripes: (0..STRIPES).map(|_| Mutex::new(HashMap::new())).collect(),
        }
    }

    fn update(&self, key: i64, v: f64) {
        upsert(&mut self.stripes[bucket(key, STRIPES)].lock(), key, v);
    }

    fn merge(&self, key: i64, s: S) {
        merge_into(&mut self.stripes[bucket(key, STRIPES)].lock(), key, s);
    }

    fn into_table(self) -> Table<S> {
        let mut out = HashMap::new();
        for stripe in self.stripes {
            out.extend(stripe.into_inner());
        }
        out
    }
}

fn finish_all<S: State>(table: Table<S>, f: AggFunction) -> BTreeMap<i64, f64> {
    table.into_iter().map(|(k, s)| (k, s.finish(f))).collect()
}

fn merge_all<S: State>(partials: Vec<Table<S>>) -> Table<S> {
    let mut iter = partials.into_iter();
    let mut out = iter.next().unwrap_or_default();
    for p in iter {
        for (k, s) in p {
            merge_into(&mut out, k, s);
        }
    }
    out
}

/// Key-wise combination of partial tables from one run, finalized for `f`.
/// Avg partials carry `(sum, count)` and finalize as `sum / count`.
pub fn merge_tables(partials: Vec<HashMap<i64, Partial>>, f: AggFunction) -> BTreeMap<i64, f64> {
    finish_all(merge_all(partials), f)
}

fn chunks(records: &[(i64, f64)], threads: usize) -> Vec<&[(i64, f64)]> {
    if records.is_empty() {
        return Vec::new();
    }
    records.chunks(records.len().div_ceil(threads)).collect()
}

/// Aggregates `records` by key with the default [`AggConfig`].
pub fn aggregate(
    records: &[(i64, f64)],
    function: AggFunction,
    strategy: Strategy,
    threads: usize,
) -> Result<BTreeMap<i64, f64>, AggError> {
    aggregate_with(records, function, strategy, threads, &AggConfig::default()).map(|(m, _)| m)
}

pub fn aggregate_with(
    records: &[(i64, f64)],
    function: AggFunction,
    strategy: Strategy,
    threads: usize,
    config: &AggConfig,
) -> Result<(BTreeMap<i64, f64>, AggStats), AggError> {
    if threads == 0 {
        return Err(AggError::ZeroThreads);
    }
    if !supports(strategy, function) {
        return Err(AggError::UnsupportedAggregation {
            strategy,
            class: function.class(),
        });
    }
    let mut stats = AggStats::default();
    let parts = chunks(records, threads);
    let out = if function.class() == AggClass::Holistic {
        run::<Values>(&parts, strategy, config, &mut stats)
            .into_iter()
            .map(|(k, s)| (k, s.finish(function)))
            .collect()
    } else {
        finish_all(run::<Partial>(&parts, strategy, config, &mut stats), function)
    };
    Ok((out, stats))
}

fn run<S: State>(
    parts: &[&[(i64, f64)]],
    strategy: Strategy,
    config: &AggConfig,
    stats: &mut AggStats,
) -> Table<S> {
    match strategy {
        Strategy::Shared => shared(parts),
        Strategy::Independent => independent(parts),
        Strategy::PartitionAndAggregate => partition_and_aggregate(parts),
        Strategy::Plat => plat(parts, config.plat_capacity, stats),
        Strategy::Hybrid => hybrid(parts, config.hybrid_capacity, stats),
        Strategy::ContentionLocal => contention(parts, config, false, stats),
        Strategy::ContentionGlobal => contention(parts, config, true, stats),
    }
}

fn shared<S: State>(parts: &[&[(i64, f64)]]) -> Table<S> {
    let table = SharedTable::new();
    std::thread::scope(|s| {
        for part in parts {
            let table = &table;
            s.spawn(move || {
                for &(k, v) in *part {
                    table.update(k, v);
                }
            });
        }
    });
    table.into_table()
}

fn independent<S: State>(parts: &[&[(i64, f64)]]) -> Table<S> {
    let partials: Vec<Table<S>> = std::thread::scope(|s| {
        let handles: Vec<_> = parts
            .iter()
            .map(|part| {
                s.spawn(move || {
                    let mut t = HashMap::new();
                    for &(k, v) in *part {
                        upsert(&mut t, k, v);
                    }
                    t
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    merge_all(partials)
}

/// Phase one writes each thread's records into its row of a
/// `threads x threads` grid; phase two has thread `j` aggregate column `j`.
/// Every key lands in exactly one column, so output tables are disjoint.
fn partition_grid(parts: &[&[(i64, f64)]]) -> Vec<Vec<Vec<(i64, f64)>>> {
    let n = parts.len();
    std::thread::scope(|s| {
        let handles: Vec<_> = parts
            .iter()
            .map(|part| {
                s.spawn(move || {
                    let mut row = vec![Vec::new(); n];
                    for &(k, v) in *part {
                        row[bucket(k, n)].push((k, v));
                    }
                    row
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn aggregate_columns<S: State>(grid: &[Vec<Vec<(i64, f64)>>], width: usize) -> Vec<Table<S>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..width)
            .map(|j| {
                s.spawn(move || {
                    let mut t = HashMap::new();
                    for row in grid {
                        for &(k, v) in &row[j] {
                            upsert(&mut t, k, v);
                        }
                    }
                    t
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn partition_and_aggregate<S: State>(parts: &[&[(i64, f64)]]) -> Table<S> {
    let grid = partition_grid(parts);
    let cells = aggregate_columns::<S>(&grid, parts.len());
    let mut out = HashMap::new();
    for cell in cells {
        out.extend(cell);
    }
    out
}

fn plat<S: State>(parts: &[&[(i64, f64)]], capacity: usize, stats: &mut AggStats) -> Table<S> {
    let n = parts.len();
    let overflow = AtomicU64::new(0);
    let (locals, grid): (Vec<Table<S>>, Vec<Vec<Vec<(i64, f64)>>>) = std::thread::scope(|s| {
        let handles: Vec<_> = parts
            .iter()
            .map(|part| {
                let overflow = &overflow;
                s.spawn(move || {
                    let mut local: Table<S> = HashMap::with_capacity(capacity.min(part.len()));
                    let mut row = vec![Vec::new(); n];
                    let mut spilled = 0u64;
                    for &(k, v) in *part {
                        if let Some(st) = local.get_mut(&k) {
                            st.update(v);
                        } else if local.len() < capacity {
                            local.insert(k, S::new(v));
                        } else {
                            row[bucket(k, n)].push((k, v));
                            spilled += 1;
                        }
                    }
                    overflow.fetch_add(spilled, Ordering::Relaxed);
                    (local, row)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).unzip()
    });
    stats.overflow_records += overflow.into_inner();
    let mut tables = locals;
    tables.extend(aggregate_columns::<S>(&grid, n));
    merge_all(tables)
}

fn hybrid<S: State>(parts: &[&[(i64, f64)]], capacity: usize, stats: &mut AggStats) -> Table<S> {
    let global = SharedTable::new();
    let flushes = AtomicU64::new(0);
    let capacity = capacity.max(1);
    std::thread::scope(|s| {
        for part in parts {
            let (global, flushes) = (&global, &flushes);
            s.spawn(move || {
                let mut local: Table<S> = HashMap::with_capacity(capacity);
                for &(k, v) in *part {
                    if let Some(st) = local.get_mut(&k) {
                        st.update(v);
                        continue;
                    }
                    if local.len() >= capacity {
                        for (lk, ls) in local.drain() {
                            global.merge(lk, ls);
                        }
                        flushes.fetch_add(1, Ordering::Relaxed);
                    }
                    local.insert(k, S::new(v));
                }
                for (lk, ls) in local {
                    global.merge(lk, ls);
                }
            });
        }
    });
    stats.flushes += flushes.into_inner();
    global.into_table()
}

/// Keys occurring in more than `fraction` of a window.
fn hot_in_window(window: &[(i64, f64)], fraction: f64) -> Vec<i64> {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &(k, _) in window {
        *counts.entry(k).or_default() += 1;
    }
    let threshold = fraction * window.len() as f64;
    counts
        .into_iter()
        .filter(|&(_, c)| c as f64 > threshold)
        .map(|(k, _)| k)
        .collect()
}

fn contention<S: State>(
    parts: &[&[(i64, f64)]],
    config: &AggConfig,
    global_copies: bool,
    stats: &mut AggStats,
) -> Table<S> {
    let global = SharedTable::new();
    let copies: Vec<SharedTable<S>> = if global_copies {
        (0..parts.len().div_ceil(2).max(1))
            .map(|_| SharedTable::new())
            .collect()
    } else {
        Vec::new()
    };
    let hot_global: RwLock<HashSet<i64>> = RwLock::new(HashSet::new());
    let window = config.contention_window.max(1);
    let locals: Vec<(Table<S>, HashSet<i64>)> = std::thread::scope(|s| {
        let handles: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(t, part)| {
                let (global, copies, hot_global) = (&global, &copies, &hot_global);
                s.spawn(move || {
                    let mut clones: Table<S> = HashMap::new();
                    let mut hot: HashSet<i64> = HashSet::new();
                    for w in part.chunks(window) {
                        let detected = hot_in_window(w, config.hot_fraction);
                        if global_copies {
                            if detected.iter().any(|k| !hot_global.read().contains(k)) {
                                hot_global.write().extend(detected.iter().copied());
                            }
                            hot.extend(hot_global.read().iter().copied());
                        } else {
                            hot.extend(detected);
                        }
                        for &(k, v) in w {
                            if !hot.contains(&k) {
                                global.update(k, v);
                            } else if global_copies {
                                copies[t % copies.len()].update(k, v);
                            } else {
                                upsert(&mut clones, k, v);
                            }
                        }
                    }
                    (clones, hot)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut hot_keys: HashSet<i64> = hot_global.into_inner();
    for (clones, hot) in locals {
        hot_keys.extend(hot);
        for (k, s) in clones {
            global.merge(k, s);
        }
    }
    for copy in copies {
        for (k, s) in copy.into_table() {
            global.merge(k, s);
        }
    }
    stats.hot_keys += hot_keys.len() as u64;
    global.into_table()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(records: &[(i64, f64)], f: AggFunction) -> BTreeMap<i64, f64> {
        let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for &(k, v) in records {
            groups.entry(k).or_default().push(v);
        }
        groups
            .into_iter()
            .map(|(k, mut vs)| {
                let r = match f {
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
                (k, r)
            })
            .collect()
    }

    #[test]
    fn two_group_sum_every_strategy() {
        let recs = [(1, 10.0), (2, 20.0), (1, 5.0)];
        for s in Strategy::ALL {
            let out = aggregate(&recs, AggFunction::Sum, s, 4).unwrap();
            assert_eq!(out, BTreeMap::from([(1, 15.0), (2, 20.0)]), "{s}");
        }
    }

    #[test]
    fn capability_matrix() {
        use AggFunction::*;
        assert!(!supports(Strategy::Independent, Median));
        assert!(supports(Strategy::PartitionAndAggregate, Median));
        assert!(supports(Strategy::Shared, Sum));
        for s in [Strategy::Plat, Strategy::Hybrid, Strategy::ContentionLocal, Strategy::ContentionGlobal] {
            assert!(!supports(s, Median));
            assert!(supports(s, Avg));
        }
    }

    #[test]
    fn unsupported_and_zero_threads() {
        assert_eq!(
            aggregate(&[(1, 1.0)], AggFunction::Median, Strategy::Independent, 1),
            Err(AggError::UnsupportedAggregation {
                strategy: Strategy::Independent,
                class: AggClass::Holistic
            })
        );
        assert_eq!(
            aggregate(&[(1, 1.0)], AggFunction::Sum, Strategy::Shared, 0),
            Err(AggError::ZeroThreads)
        );
    }

    #[test]
    fn merge_examples() {
        let p = |pairs: &[(i64, f64)]| -> HashMap<i64, Partial> {
            pairs.iter().map(|&(k, v)| (k, Partial::of(v))).collect()
        };
        assert_eq!(
            merge_tables(vec![p(&[(1, 3.0)]), p(&[(1, 4.0), (2, 1.0)])], AggFunction::Sum),
            BTreeMap::from([(1, 7.0), (2, 1.0)])
        );
        let avg = vec![
            HashMap::from([(1, Partial::sum_count(10.0, 2))]),
            HashMap::from([(1, Partial::sum_count(20.0, 3))]),
        ];
        assert_eq!(merge_tables(avg, AggFunction::Avg), BTreeMap::from([(1, 6.0)]));
        assert!(merge_tables(vec![], AggFunction::Sum).is_empty());
    }

    #[test]
    fn lower_median() {
        let recs = [(1, 4.0), (1, 1.0), (1, 3.0), (1, 2.0)];
        let out = aggregate(&recs, AggFunction::Median, Strategy::Shared, 2).unwrap();
        assert_eq!(out[&1], 2.0);
    }

    #[test]
    fn plat_overflow_path() {
        let recs: Vec<(i64, f64)> = (0..10_000).map(|i| (i % 500, i as f64)).collect();
        let cfg = AggConfig {
            plat_capacity: 16,
            ..AggConfig::default()
        };
        let (out, stats) = aggregate_with(&recs, AggFunction::Sum, Strategy::Plat, 3, &cfg).unwrap();
        assert!(stats.overflow_records > 0);
        assert_eq!(out, oracle(&recs, AggFunction::Sum));
    }

    #[test]
    fn contention_clones_heavy_hitter() {
        let recs: Vec<(i64, f64)> = (0..20_000)
            .map(|i| if i % 4 != 0 { (7, 1.0) } else { (i, 1.0) })
            .collect();
        for s in [Strategy::ContentionLocal, Strategy::ContentionGlobal] {
            let (out, stats) =
                aggregate_with(&recs, AggFunction::Count, s, 4, &AggConfig::default()).unwrap();
            assert!(stats.hot_keys >= 1, "{s}");
            assert_eq!(out[&7], 15_000.0);
            assert_eq!(out, oracle(&recs, AggFunction::Count));
        }
    }

    #[test]
    fn empty_input() {
        for s in Strategy::ALL {
            assert!(aggregate(&[], AggFunction::Sum, s, 3).unwrap().is_empty());
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("adaptive".parse::<Strategy>().is_err());
    }
}
