//! Partition-parallel execution of engine plans on a worker pool.

mod compile;
mod graph;

use thiserror::Error;

pub use compile::{compile, CompileCtx, Compiled, IndexCache, IndexedJoinTasks};
pub use graph::{execute, Data, Event, ExecError, ExecResult, ExecStats, TaskCtx, TaskFn, TaskGraph, TaskId, TraceEntry};

use crate::agg::{AggError, Strategy};
use crate::index::IndexError;
use crate::storage::StorageError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExecConfig {
    pub workers: usize,
    /// Target rows per partition at ingestion.
    pub partition_size: usize,
    pub strategy: Strategy,
}

impl Default for ExecConfig {
    fn default() -> ExecConfig {
        ExecConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            partition_size: 4096,
            strategy: Strategy::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecutorError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Aggregation(#[from] AggError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("operator {key}: column `{column}` not available")]
    Layout { key: u32, column: String },
    #[error("plan has no operators")]
    EmptyPlan,
}

/// Outcome of running a compiled plan.
#[derive(Debug)]
pub struct PlanRun {
    pub output: Data,
    pub exec: ExecResult,
    /// Indexed-input partitions never read by their join.
    pub partitions_pruned: usize,
    pub partitions_touched: Vec<(u32, Vec<u32>)>,
}

pub fn run_compiled(c: Compiled, workers: usize) -> Result<PlanRun, ExecutorError> {
    let Compiled {
        graph,
        sink,
        indexed_joins,
        ..
    } = c;
    let mut exec = execute(graph, workers)?;
    let output = (*exec.outputs.remove(&sink).expect("sink output")).clone();
    let read: std::collections::HashSet<TaskId> = exec
        .log
        .iter()
        .filter_map(|e| match e {
            Event::Fetch { from, .. } => Some(*from),
            _ => None,
        })
        .collect();
    let mut pruned = 0;
    let mut touched = Vec::new();
    for j in &indexed_joins {
        let mut t = Vec::new();
        for &(ordinal, task) in &j.a_parts {
            if !read.contains(&task) {
                pruned += 1;
            } else {
                t.push(ordinal);
            }
        }
        touched.push((j.op_key, t));
    }
    Ok(PlanRun {
        output,
        exec,
        partitions_pruned: pruned,
        partitions_touched: touched,
    })
}
