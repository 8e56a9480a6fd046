//! Benchmark harness over the bundled query suites.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::engine::{Engine, QueryResult};
use crate::reference::{reference_evaluate, results_match};
use crate::sql::{queries, BoundQuery};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Tpch,
    Udf,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Tpch => "tpch",
            Suite::Udf => "udf",
        }
    }

    /// (name, SQL) pairs of the suite.
    pub fn queries(self) -> Vec<(&'static str, &'static str)> {
        match self {
            Suite::Tpch => queries::TPCH_QUERIES.to_vec(),
            Suite::Udf => queries::UDF_QUERIES.to_vec(),
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Suite, String> {
        match s.to_ascii_lowercase().as_str() {
            "tpch" => Ok(Suite::Tpch),
            "udf" => Ok(Suite::Udf),
            _ => Err(format!("unknown suite `{s}` (expected tpch or udf)")),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchEntry {
    pub name: String,
    pub sf: f64,
    pub workers: usize,
    pub wall_ms: f64,
    pub rows: usize,
    pub bytes_transferred: u64,
    pub partitions_pruned: usize,
    /// `Some(true)` when cross-checked against the reference evaluator.
    pub verified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub suite: Suite,
    pub strategy: String,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    /// One `key=value` line per query.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "suite={} query={} sf={} workers={} strategy={} wall_ms={:.3} rows={} bytes_transferred={} partitions_pruned={} verified={}",
                self.suite,
                e.name,
                e.sf,
                e.workers,
                self.strategy,
                e.wall_ms,
                e.rows,
                e.bytes_transferred,
                e.partitions_pruned,
                match e.verified {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "skipped",
                }
            );
        }
        out
    }
}

/// Whether row order is part of the query's answer.
pub fn order_matters(q: &BoundQuery) -> bool {
    q.udf.is_some() || !q.order_by.is_empty() || q.limit.is_some()
}

/// Runs `sql` on the engine and the reference evaluator and compares.
pub fn verify_query(engine: &Engine, name: &str, sql: &str) -> Result<QueryResult, Error> {
    let q = engine.bind(sql)?;
    let got = engine.run_bound(&q)?;
    let want = reference_evaluate(&q, engine.catalog(), engine.udfs())?;
    results_match(&got, &want, order_matters(&q))
        .map_err(|d| Error::VerificationFailed(format!("{name}: {d}")))?;
    Ok(got)
}

/// Runs every query of `suite` against the engine's catalog, which must
/// hold data generated at scale factor `sf`.
pub fn run_bench(engine: &Engine, suite: Suite, sf: f64, verify: bool) -> Result<BenchReport, Error> {
    let mut entries = Vec::new();
    for (name, sql) in suite.queries() {
        let r = if verify {
            verify_query(engine, name, sql)?
        } else {
            engine.query(sql)?
        };
        entries.push(BenchEntry {
            name: name.to_string(),
            sf,
            workers: engine.config().workers,
            wall_ms: r.stats.wall.as_secs_f64() * 1e3,
            rows: r.rows.len(),
            bytes_transferred: r.stats.bytes_transferred,
            partitions_pruned: r.stats.partitions_pruned,
            verified: verify.then_some(true),
        });
    }
    Ok(BenchReport {
        suite,
        strategy: engine.config().strategy.name().to_string(),
        entries,
    })
}
