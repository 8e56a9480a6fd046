//! Query entry point: SQL text in, rows out.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::executor::{compile, run_compiled, CompileCtx, Data, ExecConfig, IndexCache};
use crate::planner::{plan_query, render_explain, QueryPlan};
use crate::sql::{parse, bind, BoundQuery};
use crate::storage::Catalog;
use crate::udf::{UdfOutput, UdfRegistry};
use crate::value::Row;
use crate::Error;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryStats {
    pub bytes_transferred: u64,
    pub bytes_fetched: u64,
    pub partitions_pruned: usize,
    pub tasks: usize,
    /// Raw-file reads during this query.
    pub ingestions: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    /// Set when the query ended in a display-only UDF.
    pub display_only: bool,
    pub stats: QueryStats,
    pub trace: String,
}

impl QueryResult {
    pub fn from_rows(columns: Vec<String>, rows: Vec<Row>) -> QueryResult {
        QueryResult {
            columns,
            rows,
            display_only: false,
            stats: QueryStats::default(),
            trace: String::new(),
        }
    }

    /// Rows of a UDF result: frames keep their columns, scalars become a
    /// one-cell row named after the function.
    pub fn from_udf(name: &str, out: UdfOutput) -> QueryResult {
        match out {
            UdfOutput::Frame(f) => QueryResult::from_rows(f.names().to_vec(), f.to_rows()),
            UdfOutput::Scalar(v) => QueryResult::from_rows(vec![name.to_string()], vec![vec![v]]),
            UdfOutput::Nothing => QueryResult {
                display_only: true,
                ..QueryResult::from_rows(Vec::new(), Vec::new())
            },
        }
    }

    /// Pipe-separated table with a header line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if self.display_only {
            out.push_str("(display only)\n");
            return out;
        }
        let _ = writeln!(out, "{}", self.columns.join("|"));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join("|"));
        }
        let _ = writeln!(out, "({} rows)", self.rows.len());
        out
    }
}

pub struct Engine {
    catalog: Arc<Catalog>,
    udfs: Arc<UdfRegistry>,
    config: ExecConfig,
    indexes: IndexCache,
}

impl Engine {
    pub fn new(catalog: Arc<Catalog>, udfs: Arc<UdfRegistry>, config: ExecConfig) -> Engine {
        Engine {
            catalog,
            udfs,
            config,
            indexes: IndexCache::new(),
        }
    }

    /// Engine over a catalog config file with the bundled UDF suite.
    pub fn open(catalog_path: &Path, config: ExecConfig) -> Result<Engine, Error> {
        let catalog = Catalog::from_config_file(catalog_path)?;
        Ok(Engine::new(Arc::new(catalog), Arc::new(UdfRegistry::with_suite()), config))
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn udfs(&self) -> &Arc<UdfRegistry> {
        &self.udfs
    }

    pub fn config(&self) -> &ExecConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: ExecConfig) {
        if config.partition_size != self.config.partition_size {
            self.indexes.clear();
        }
        self.config = config;
    }

    pub fn index_cache(&self) -> &IndexCache {
        &self.indexes
    }

    pub fn bind(&self, sql: &str) -> Result<BoundQuery, Error> {
        let (parsed, _) = parse(sql)?;
        Ok(bind(parsed, &self.catalog, &self.udfs)?)
    }

    pub fn plan(&self, sql: &str) -> Result<QueryPlan, Error> {
        Ok(plan_query(&self.bind(sql)?)?)
    }

    pub fn explain(&self, sql: &str) -> Result<String, Error> {
        Ok(render_explain(&self.plan(sql)?.engine))
    }

    pub fn query(&self, sql: &str) -> Result<QueryResult, Error> {
        self.run_bound(&self.bind(sql)?)
    }

    pub fn run_bound(&self, q: &BoundQuery) -> Result<QueryResult, Error> {
        let started = Instant::now();
        let ingest_before = self.catalog.ingestion_count();
        let plan = plan_query(q)?;
        let cx = CompileCtx {
            catalog: &self.catalog,
            udfs: self.udfs.clone(),
            indexes: &self.indexes,
            config: &self.config,
        };
        let compiled = compile(&plan.engine, &cx)?;
        let columns: Vec<String> = compiled.columns.iter().map(|f| f.name.clone()).collect();
        let run = run_compiled(compiled, self.config.workers)?;
        let mut result = match run.output {
            Data::Udf(out) => {
                let name = q.udf.as_ref().map_or("udf", |u| u.name.as_str());
                QueryResult::from_udf(name, out)
            }
            Data::Rows(rows) => QueryResult::from_rows(columns, rows.to_vec()),
            Data::Buckets(b) => {
                QueryResult::from_rows(columns, b.values().flat_map(|r| r.iter().cloned()).collect())
            }
        };
        result.stats = QueryStats {
            bytes_transferred: run.exec.stats.bytes_transferred,
            bytes_fetched: run.exec.stats.bytes_fetched,
            partitions_pruned: run.partitions_pruned,
            tasks: run.exec.stats.tasks_run,
            ingestions: self.catalog.ingestion_count() - ingest_before,
            wall: started.elapsed(),
        };
        result.trace = run.exec.trace_text();
        Ok(result)
    }
}
