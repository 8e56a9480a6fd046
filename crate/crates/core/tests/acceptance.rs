//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use rawq_core::agg::{aggregate, supports, AggError, AggFunction, Strategy};
use rawq_core::bench::{order_matters, Suite};
use rawq_core::datagen::tpch::generate_tpch;
use rawq_core::datagen::{
    cardinality, generate, movc_window, write_dataset, DatasetSpec, Distribution, ValueRule,
};
use rawq_core::executor::{compile, execute, run_compiled, CompileCtx, Data};
use rawq_core::index::{build_index, indexed_join, PartitionRange};
use rawq_core::ops::hash_join_rows;
use rawq_core::planner::{convert_to_engine_plan, plan_query, render_explain};
use rawq_core::reference::{reference_evaluate, results_match};
use rawq_core::sql::queries;
use rawq_core::storage::{Catalog, Field, Format, Partition, PartitionedRelation, Schema, SharedStore, TableOptions};
use rawq_core::udf::UdfRegistry;
use rawq_core::value::{cmp_rows, DataType, Value};
use rawq_core::{Engine, ExecConfig, QueryResult};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 ------------------------------------------------------------------------

fn oracle_equivalence() -> Outcome {
    let mut checked = 0;
    let mut slowest = Duration::ZERO;
    for sf in [0.01, 0.1] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        generate_tpch(dir.path(), sf, 2024).map_err(|e| e.to_string())?;
        let partition_size = if sf < 0.05 { 2048 } else { 16384 };
        let mut oracles: BTreeMap<&str, QueryResult> = BTreeMap::new();
        for workers in [1, 4, 8] {
            let engine = tpch_engine(dir.path(), workers, partition_size);
            for (name, sql) in Suite::Tpch.queries().into_iter().chain(Suite::Udf.queries()) {
                let q = engine.bind(sql).map_err(|e| format!("{name}: {e}"))?;
                let start = Instant::now();
                let got = engine.run_bound(&q).map_err(|e| format!("{name}: {e}"))?;
                let took = start.elapsed();
                slowest = slowest.max(took);
                check(took < Duration::from_secs(60), || format!("{name} sf={sf} took {took:?}"))?;
                if !oracles.contains_key(name) {
                    let want = reference_evaluate(&q, engine.catalog(), engine.udfs())
                        .map_err(|e| format!("{name} oracle: {e}"))?;
                    oracles.insert(name, want);
                }
                results_match(&got, &oracles[name], order_matters(&q))
                    .map_err(|d| format!("{name} sf={sf} workers={workers}: {d}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} runs equal the reference, slowest {slowest:.2?}"))
}

// 2 ------------------------------------------------------------------------

fn learned_index_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut probes = 0;
    for _ in 0..100 {
        let idx = random_index(&mut rng);
        for _ in 0..1000 {
            let k = probe_key(&idx, &mut rng);
            let (p, l) = (idx.probe(k), literal_probe(&idx, k));
            check(p == l, || format!("key {k}: search {p}, sum {l}"))?;
            probes += 1;
        }
    }

    // customer relation laid out in five sorted partitions
    let layout = [(1, 200), (250, 380), (400, 560), (580, 700), (701, 800)];
    let schema = Arc::new(Schema::for_table(vec![Field::new("c_custkey", DataType::Int64)]).unwrap());
    let partitions = layout
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let keys = [a, (a + b) / 2, b];
            Partition::new(i as u32 + 1, keys.iter().map(|k| vec![Value::Int(*k)]).collect())
        })
        .collect();
    let rel = PartitionedRelation {
        schema,
        partitions,
        sorted_on: Some("c_custkey".into()),
    };
    let idx = build_index(&rel, "c_custkey").map_err(|e| e.to_string())?;
    let want: Vec<PartitionRange> = layout
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| PartitionRange::new(a, b, i as u32 + 1).unwrap())
        .collect();
    check(idx.ranges() == want.as_slice(), || format!("ranges {:?}", idx.ranges()))?;
    for (i, &(a, b)) in layout.iter().enumerate() {
        for k in [a, (a + b) / 2, b] {
            check(idx.probe(k) == i as u32 + 1, || format!("key {k} → {}", idx.probe(k)))?;
        }
    }
    for gap in [0, 201, 249, 381, 390, 399, 561, 579, 801, -5] {
        check(idx.probe(gap) == 0, || format!("gap key {gap} → {}", idx.probe(gap)))?;
    }
    Ok(format!("{probes} random probes agree; customer table and gaps hold"))
}

// 3 ------------------------------------------------------------------------

fn join_pruning() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // A: 6400 sorted keys, 100 per partition; B: keys from 4 of A's ranges
    let a_path = dir.path().join("a.csv");
    let b_path = dir.path().join("b.csv");
    let a_text: String = (0..6400).map(|i| format!("{},{}\n", i * 3, i % 17)).collect();
    let chosen = [5u32, 17, 40, 63];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b_text: String = (0..2000)
        .map(|i| {
            let p = chosen[i % 4] as i64;
            let k = (p * 100 + rng.random_range(0..100)) * 3 + rng.random_range(0..2);
            format!("{k},{i}\n")
        })
        .collect();
    fs::write(&a_path, a_text).unwrap();
    fs::write(&b_path, b_text).unwrap();
    let catalog = Catalog::new(SharedStore::new(dir.path()));
    let int = |n: &str| Field::new(n, DataType::Int64);
    catalog
        .register_with(
            "a",
            "a.csv",
            Format::Csv,
            TableOptions {
                schema: Some(Schema::for_table(vec![int("ak"), int("av")]).unwrap()),
                sort_key: Some("ak".into()),
                ..TableOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
    catalog
        .register_with(
            "b",
            "b.csv",
            Format::Csv,
            TableOptions {
                schema: Some(Schema::for_table(vec![int("bk"), int("bv")]).unwrap()),
                ..TableOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;

    // kernel level
    let a = catalog.relation("a", 100).map_err(|e| e.to_string())?;
    let b = catalog.relation("b", 100).map_err(|e| e.to_string())?;
    check(a.partitions.len() == 64, || format!("A has {} partitions", a.partitions.len()))?;
    let j = indexed_join(&a, &b, "ak", "bk").map_err(|e| e.to_string())?;
    let touched_want: Vec<u32> = chosen.iter().map(|p| p + 1).collect();
    check(j.touched == touched_want, || format!("touched {:?}", j.touched))?;
    let mut got = j.relation.to_rows();
    let mut want = hash_join_rows(&a.to_rows(), 0, &b.to_rows(), 0);
    got.sort_by(|x, y| cmp_rows(x, y));
    want.sort_by(|x, y| cmp_rows(x, y));
    check(!want.is_empty() && got == want, || "indexed join differs from hash join".into())?;

    // executor level
    let engine = Engine::new(
        Arc::new(catalog),
        Arc::new(UdfRegistry::new()),
        ExecConfig {
            workers: 8,
            partition_size: 100,
            ..ExecConfig::default()
        },
    );
    let q = engine
        .bind("select bk, bv, av from b, a where bk = ak")
        .map_err(|e| e.to_string())?;
    let plan = plan_query(&q).map_err(|e| e.to_string())?;
    let cx = CompileCtx {
        catalog: engine.catalog(),
        udfs: engine.udfs().clone(),
        indexes: engine.index_cache(),
        config: engine.config(),
    };
    let compiled = compile(&plan.engine, &cx).map_err(|e| e.to_string())?;
    let a_parts = compiled.indexed_joins[0].a_parts.clone();
    check(a_parts.len() == 64, || format!("{} A partitions scheduled", a_parts.len()))?;
    let run = run_compiled(compiled, 8).map_err(|e| e.to_string())?;
    let (_, touched) = &run.partitions_touched[0];
    check(*touched == touched_want, || format!("executor touched {touched:?}"))?;
    check(run.partitions_pruned == 60, || format!("pruned {}", run.partitions_pruned))?;
    let untouched_bytes: u64 = a_parts
        .iter()
        .filter(|(ord, _)| !touched_want.contains(ord))
        .map(|(_, task)| run.exec.stats.fetched_from[*task])
        .sum();
    check(untouched_bytes == 0, || format!("{untouched_bytes} bytes read from pruned partitions"))?;
    let Data::Rows(rows) = &run.output else {
        return Err("join produced no rows".into());
    };
    let got = QueryResult::from_rows(q.output_names(), rows.to_vec());
    let oracle = reference_evaluate(&q, engine.catalog(), engine.udfs()).map_err(|e| e.to_string())?;
    results_match(&got, &oracle, false)?;
    Ok(format!(
        "4 of 64 partitions touched, 0 bytes from the other 60, {} joined rows match",
        rows.len()
    ))
}

// 4 ------------------------------------------------------------------------

fn aggregation_matrix() -> Outcome {
    let start = Instant::now();
    let r = 1_000_000u64;
    let mut runs = 0;
    let mut rejected = 0;
    for dist in Distribution::ALL {
        for c in [1u64 << 4, 1 << 10, 1 << 16] {
            let rr = if matches!(dist, Distribution::RSeq | Distribution::RSeqShf) { r - r % c } else { r };
            let mut spec = DatasetSpec::new(dist, rr, c, 4);
            spec.w = spec.w.min(c);
            let keys = generate(&spec).map_err(|e| format!("{dist} c={c}: {e}"))?;
            let records = payload(&keys);
            for f in AggFunction::ALL {
                let want = agg_oracle(&records, f);
                for s in Strategy::ALL {
                    for threads in [1, 2, 8] {
                        match (supports(s, f), aggregate(&records, f, s, threads)) {
                            (true, Ok(got)) => {
                                check(agg_maps_match(&got, &want), || {
                                    format!("{} {} on {dist} c={c} threads={threads}", s.name(), f.name())
                                })?;
                                runs += 1;
                            }
                            (false, Err(AggError::UnsupportedAggregation { .. })) => rejected += 1,
                            (_, other) => {
                                return Err(format!(
                                    "{} {} threads={threads}: unexpected {:?}",
                                    s.name(),
                                    f.name(),
                                    other.map(|m| m.len())
                                ))
                            }
                        }
                    }
                }
            }
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(300), || format!("matrix took {took:?}"))?;
    Ok(format!("{runs} supported runs match, {rejected} unsupported rejected, {took:.1?}"))
}

// 5 ------------------------------------------------------------------------

fn generators() -> Outcome {
    let r = 1_000_000u64;
    for dist in Distribution::ALL.into_iter().filter(|d| d.exact_cardinality()) {
        for c in [16u64, 1024, 65536] {
            let rr = if matches!(dist, Distribution::RSeq | Distribution::RSeqShf) { r - r % c } else { r };
            let keys = generate(&DatasetSpec::new(dist, rr, c, 5)).map_err(|e| e.to_string())?;
            check(cardinality(&keys) as u64 == c, || format!("{dist} c={c}: {} distinct", cardinality(&keys)))?;
            if matches!(dist, Distribution::HHit | Distribution::HHitShf) {
                let mut freq: BTreeMap<i64, u64> = BTreeMap::new();
                for k in &keys {
                    *freq.entry(*k).or_default() += 1;
                }
                let top = *freq.values().max().unwrap();
                check(top == rr / 2, || format!("{dist} c={c}: hitter count {top}"))?;
            }
        }
    }

    let keys = generate(&DatasetSpec::new(Distribution::Zipf, r, 1024, 5)).map_err(|e| e.to_string())?;
    let count = |k: i64| keys.iter().filter(|&&x| x == k).count() as f64;
    let ratio = count(1) / count(4);
    check((1.8..=2.2).contains(&ratio), || format!("zipf rank-1/rank-4 ratio {ratio}"))?;

    for c in [64u64, 1024, 65536] {
        let spec = DatasetSpec::new(Distribution::MovC, r, c, 5);
        let keys = generate(&spec).map_err(|e| e.to_string())?;
        for (i, &k) in keys.iter().enumerate() {
            let (lo, hi) = movc_window(i as u64, r, c, spec.w);
            check(lo <= k && k <= hi, || format!("movc key {i} = {k} outside [{lo}, {hi}]"))?;
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for dist in Distribution::ALL {
        let spec = DatasetSpec::new(dist, 100_000, 1000, 77);
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_dataset(&generate(&spec).unwrap(), ValueRule::Index, &a, Format::Csv).map_err(|e| e.to_string())?;
        write_dataset(&generate(&spec).unwrap(), ValueRule::Index, &b, Format::Csv).map_err(|e| e.to_string())?;
        check(fs::read(&a).unwrap() == fs::read(&b).unwrap(), || format!("{dist} output not reproducible"))?;
    }
    Ok(format!("cardinalities exact, hitter share 1/2, zipf ratio {ratio:.3}, movc windows hold, output reproducible"))
}

// 6 ------------------------------------------------------------------------

fn plan_conversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..200 {
        let pp = random_physical_plan(&mut rng);
        let ep = convert_to_engine_plan(&pp).map_err(|e| format!("plan {i}: {e}"))?;
        check_plan_fidelity(&pp, &ep).map_err(|e| format!("plan {i}: {e}"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_tpch(dir.path(), 0.001, 6).map_err(|e| e.to_string())?;
    let engine = tpch_engine(dir.path(), 2, 1024);
    let explain = engine.explain(queries::REVENUE_QUERY).map_err(|e| e.to_string())?;
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/revenue_explain.txt"))
        .map_err(|e| e.to_string())?;
    check(explain == golden, || format!("explain differs from golden:\n{explain}"))?;
    let plan = engine.plan(queries::REVENUE_QUERY).map_err(|e| e.to_string())?;
    let mut kinds: Vec<&str> = plan.engine.ops.iter().map(|o| o.kind.name()).collect();
    kinds.sort_unstable();
    let mut want = vec![
        "read_table", "read_table", "filters", "select_columns", "merge_join", "groupby_agg", "sort_values", "head",
    ];
    want.sort_unstable();
    check(kinds == want, || format!("operator set {kinds:?}"))?;
    check(render_explain(&plan.engine) == golden, || "render differs".into())?;
    Ok("200 random plans keep keys, order and dependencies; revenue explain matches golden".into())
}

// 7 ------------------------------------------------------------------------

fn executor_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..200 {
        let seed = rng.random::<u64>();
        let mut first: Option<Vec<(usize, i64)>> = None;
        for workers in [1, 2, 8] {
            let (g, expected) = random_dag(&mut ChaCha8Rng::seed_from_u64(seed));
            let inputs: Vec<Vec<usize>> = (0..g.len()).map(|t| g.task(t).inputs.clone()).collect();
            let res = execute(g, workers).map_err(|e| format!("dag {i}: {e}"))?;
            check_log(&inputs, &res).map_err(|e| format!("dag {i} workers={workers}: {e}"))?;
            let outs: Vec<(usize, i64)> = res
                .outputs
                .iter()
                .map(|(t, d)| match &**d {
                    Data::Rows(r) => (*t, r[0][0].as_key().unwrap()),
                    _ => (*t, i64::MIN),
                })
                .collect();
            for (t, v) in &outs {
                check(expected[*t] == *v, || format!("dag {i}: task {t} = {v}"))?;
            }
            match &first {
                None => first = Some(outs),
                Some(f) => check(*f == outs, || format!("dag {i}: results differ at workers={workers}"))?,
            }
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_tpch(dir.path(), 0.01, 7).map_err(|e| e.to_string())?;
    let engine = tpch_engine(dir.path(), 4, 2048);
    engine.catalog().set_persistence(true);
    let mut runs = Vec::new();
    for (name, sql) in Suite::Tpch.queries() {
        let a = engine.query(sql).map_err(|e| format!("{name}: {e}"))?;
        let b = engine.query(sql).map_err(|e| format!("{name}: {e}"))?;
        check(b.stats.ingestions == 0, || format!("{name}: second run ingested {} files", b.stats.ingestions))?;
        check(a.rows == b.rows, || format!("{name}: second run differs"))?;
        runs.push(a.stats.ingestions);
    }
    Ok(format!("200 DAGs × 3 worker counts exactly-once and identical; warm runs ingest 0 files (cold: {runs:?})"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("learned-index math", learned_index_math),
        ("join pruning", join_pruning),
        ("aggregation matrix", aggregation_matrix),
        ("dataset generators", generators),
        ("plan conversion fidelity", plan_conversion),
        ("executor determinism", executor_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({took:.1?}) — {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({took:.1?}) — {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
