//! Task graph and its multi-worker scheduler.
//!
//! Each task output lives in the store of the worker that produced it.
//! Inputs are fetched lazily through [`TaskCtx`]; bytes read from another
//! worker's store count as transferred.

use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use thiserror::Error;

use crate::udf::{panic_message, UdfOutput};
use crate::value::{row_bytes, Row};

pub type TaskId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Rows(Arc<Vec<Row>>),
    /// Rows split by destination ordinal.
    Buckets(BTreeMap<u32, Arc<Vec<Row>>>),
    Udf(UdfOutput),
}

fn rows_bytes(rows: &[Row]) -> u64 {
    rows.iter().map(|r| row_bytes(r) as u64).sum()
}

impl Data {
    pub fn rows(rows: Vec<Row>) -> Data {
        Data::Rows(Arc::new(rows))
    }

    pub fn approx_bytes(&self) -> u64 {
        match self {
            Data::Rows(r) => rows_bytes(r),
            Data::Buckets(b) => b.values().map(|r| rows_bytes(r)).sum(),
            Data::Udf(_) => 64,
        }
    }
}

pub type TaskFn = Box<dyn FnOnce(&TaskCtx) -> Result<Data, String> + Send>;

pub struct Task {
    pub label: String,
    /// Engine operator the task belongs to (0 for bookkeeping tasks).
    pub op_key: u32,
    pub inputs: Vec<TaskId>,
    func: Option<TaskFn>,
}

#[derive(Default)]
pub struct TaskGraph {
    tasks: Vec<Task>,
}

impl TaskGraph {
    pub fn new() -> TaskGraph {
        TaskGraph::default()
    }

    /// Adds a task; inputs must already be in the graph, which keeps the
    /// graph acyclic by construction.
    pub fn add(
        &mut self,
        label: impl Into<String>,
        op_key: u32,
        inputs: Vec<TaskId>,
        func: impl FnOnce(&TaskCtx) -> Result<Data, String> + Send + 'static,
    ) -> TaskId {
        let id = self.tasks.len();
        assert!(
            inputs.iter().all(|&i| i < id),
            "task inputs must precede the task"
        );
        self.tasks.push(Task {
            label: label.into(),
            op_key,
            inputs,
            func: Some(Box::new(func)),
        });
        id
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id]
    }

    /// Tasks nothing depends on; their outputs are kept.
    pub fn sinks(&self) -> Vec<TaskId> {
        let mut consumed = vec![false; self.tasks.len()];
        for t in &self.tasks {
            for &i in &t.inputs {
                consumed[i] = true;
            }
        }
        (0..self.tasks.len()).filter(|&i| !consumed[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Start { task: TaskId, worker: usize },
    Fetch { task: TaskId, from: TaskId, bytes: u64 },
    Finish { task: TaskId, worker: usize },
    Release { task: TaskId },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("task {task} ({label}) panicked: {cause}")]
    TaskPanicked {
        task: TaskId,
        label: String,
        cause: String,
    },
    #[error("task {task} ({label}) failed: {message}")]
    TaskFailed {
        task: TaskId,
        label: String,
        message: String,
    },
}

/// Input handle given to a running task.
pub struct TaskCtx {
    task: TaskId,
    worker: usize,
    inputs: Vec<(TaskId, usize, Arc<Data>)>,
    fetched: Mutex<Vec<(TaskId, u64)>>,
    transferred: AtomicU64,
}

impl TaskCtx {
    pub fn task(&self) -> TaskId {
        self.task
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    fn record(&self, i: usize, bytes: u64) {
        let (from, owner, _) = &self.inputs[i];
        self.fetched.lock().push((*from, bytes));
        if *owner != self.worker {
            self.transferred.fetch_add(bytes, Ordering::Relaxed);
        }
    }

    /// Whole `i`-th input.
    pub fn fetch(&self, i: usize) -> Arc<Data> {
        let data = self.inputs[i].2.clone();
        self.record(i, data.approx_bytes());
        data
    }

    /// Rows of the `i`-th input; buckets are concatenated in ordinal order.
    pub fn fetch_rows(&self, i: usize) -> Result<Arc<Vec<Row>>, String> {
        match &*self.fetch(i) {
            Data::Rows(r) => Ok(r.clone()),
            Data::Buckets(b) => Ok(Arc::new(b.values().flat_map(|r| r.iter().cloned()).collect())),
            Data::Udf(_) => Err(format!("input {i} is not a row set")),
        }
    }

    /// One bucket of the `i`-th input; only that bucket is fetched.
    pub fn fetch_bucket(&self, i: usize, ordinal: u32) -> Result<Arc<Vec<Row>>, String> {
        match &*self.inputs[i].2 {
            Data::Buckets(b) => {
                let rows = b.get(&ordinal).cloned().unwrap_or_default();
                self.record(i, rows_bytes(&rows));
                Ok(rows)
            }
            _ => Err(format!("input {i} is not bucketed")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub task: TaskId,
    pub label: String,
    pub op_key: u32,
    pub worker: usize,
    pub start: Duration,
    pub end: Duration,
    pub bytes_fetched: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecStats {
    pub bytes_transferred: u64,
    pub bytes_fetched: u64,
    /// Bytes read out of each task's output, indexed by task id.
    pub fetched_from: Vec<u64>,
    pub tasks_run: usize,
}

#[derive(Debug)]
pub struct ExecResult {
    /// Outputs of sink tasks.
    pub outputs: BTreeMap<TaskId, Arc<Data>>,
    pub log: Vec<Event>,
    pub trace: Vec<TraceEntry>,
    pub stats: ExecStats,
}

impl ExecResult {
    pub fn trace_text(&self) -> String {
        self.trace
            .iter()
            .map(|t| {
                format!(
                    "task={} op={} label={} worker={} start_us={} end_us={} bytes={}\n",
                    t.task,
                    t.op_key,
                    t.label,
                    t.worker,
                    t.start.as_micros(),
                    t.end.as_micros(),
                    t.bytes_fetched
                )
            })
            .collect()
    }
}

struct Assignment {
    task: TaskId,
    func: TaskFn,
    ctx: TaskCtx,
}

struct Completion {
    task: TaskId,
    worker: usize,
    result: Result<Result<Data, String>, String>,
    fetched: Vec<(TaskId, u64)>,
    transferred: u64,
    start: Instant,
    end: Instant,
}

fn worker_loop(worker: usize, rx: mpsc::Receiver<Assignment>, done: mpsc::Sender<Completion>) {
    while let Ok(Assignment { task, func, ctx }) = rx.recv() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| func(&ctx))).map_err(|p| panic_message(&*p));
        let end = Instant::now();
        let completion = Completion {
            task,
            worker,
            result,
            fetched: std::mem::take(&mut *ctx.fetched.lock()),
            transferred: ctx.transferred.load(Ordering::Relaxed),
            start,
            end,
        };
        if done.send(completion).is_err() {
            break;
        }
    }
}

/// Runs every task exactly once on `workers` threads. Ready tasks are
/// dispatched in FIFO order, each to the idle worker holding its largest
/// input when possible. An output is dropped once its last consumer has
/// finished. On failure no new tasks start; in-flight ones are drained
/// and the first error is returned.
pub fn execute(mut graph: TaskGraph, workers: usize) -> Result<ExecResult, ExecError> {
    if workers == 0 {
        return Err(ExecError::ZeroWorkers);
    }
    let n = graph.tasks.len();
    let mut waiting: Vec<usize> = graph.tasks.iter().map(|t| t.inputs.len()).collect();
    let mut consumers: Vec<Vec<TaskId>> = vec![Vec::new(); n];
    for (id, t) in graph.tasks.iter().enumerate() {
        for &i in &t.inputs {
            consumers[i].push(id);
        }
    }
    let mut remaining_uses: Vec<usize> = consumers.iter().map(|c| c.len()).collect();
    let sinks: Vec<TaskId> = graph.sinks();

    let epoch = Instant::now();
    let mut store: Vec<Option<(usize, Arc<Data>, u64)>> = vec![None; n];
    let mut ready: VecDeque<TaskId> = (0..n).filter(|&i| waiting[i] == 0).collect();
    let mut idle: Vec<bool> = vec![true; workers];
    let mut log = Vec::new();
    let mut trace = Vec::new();
    let mut stats = ExecStats {
        fetched_from: vec![0; n],
        ..ExecStats::default()
    };
    let mut finished = 0usize;
    let mut in_flight = 0usize;
    let mut failure: Option<ExecError> = None;

    std::thread::scope(|scope| {
        let (done_tx, done_rx) = mpsc::channel::<Completion>();
        let mut senders = Vec::with_capacity(workers);
        for w in 0..workers {
            let (tx, rx) = mpsc::channel::<Assignment>();
            let done = done_tx.clone();
            scope.spawn(move || worker_loop(w, rx, done));
            senders.push(tx);
        }
        drop(done_tx);

        loop {
            // Dispatch.
            while failure.is_none() && idle.iter().any(|&b| b) && !ready.is_empty() {
                let task = ready.pop_front().unwrap();
                let t = &mut graph.tasks[task];
                let preferred = t
                    .inputs
                    .iter()
                    .filter_map(|&i| store[i].as_ref().map(|(w, _, b)| (*b, *w)))
                    .max_by_key(|&(b, w)| (b, std::cmp::Reverse(w)))
                    .map(|(_, w)| w)
                    .filter(|&w| idle[w]);
                let worker = preferred.unwrap_or_else(|| idle.iter().position(|&b| b).unwrap());
                let inputs = t
                    .inputs
                    .iter()
                    .map(|&i| {
                        let (owner, data, _) = store[i].as_ref().expect("input available");
                        (i, *owner, data.clone())
                    })
                    .collect();
                let ctx = TaskCtx {
                    task,
                    worker,
                    inputs,
                    fetched: Mutex::new(Vec::new()),
                    transferred: AtomicU64::new(0),
                };
                let func = t.func.take().expect("task runs once");
                idle[worker] = false;
                in_flight += 1;
                log.push(Event::Start { task, worker });
                senders[worker]
                    .send(Assignment { task, func, ctx })
                    .expect("worker alive");
            }
            if in_flight == 0 {
                break;
            }

            let c = done_rx.recv().expect("workers alive while tasks in flight");
            in_flight -= 1;
            idle[c.worker] = true;
            let label = graph.tasks[c.task].label.clone();
            let mut task_bytes = 0;
            for &(from, bytes) in &c.fetched {
                log.push(Event::Fetch {
                    task: c.task,
                    from,
                    bytes,
                });
                stats.fetched_from[from] += bytes;
                stats.bytes_fetched += bytes;
                task_bytes += bytes;
            }
            stats.bytes_transferred += c.transferred;
            trace.push(TraceEntry {
                task: c.task,
                label: label.clone(),
                op_key: graph.tasks[c.task].op_key,
                worker: c.worker,
                start: c.start - epoch,
                end: c.end - epoch,
                bytes_fetched: task_bytes,
            });
            let data = match c.result {
                Ok(Ok(d)) => d,
                Ok(Err(message)) => {
                    failure.get_or_insert(ExecError::TaskFailed {
                        task: c.task,
                        label,
                        message,
                    });
                    continue;
                }
                Err(cause) => {
                    failure.get_or_insert(ExecError::TaskPanicked {
                        task: c.task,
                        label,
                        cause,
                    });
                    continue;
                }
            };
            log.push(Event::Finish {
                task: c.task,
                worker: c.worker,
            });
            finished += 1;
            let size = data.approx_bytes();
            store[c.task] = Some((c.worker, Arc::new(data), size));
            for &i in &graph.tasks[c.task].inputs {
                remaining_uses[i] -= 1;
                if remaining_uses[i] == 0 {
                    store[i] = None;
                    log.push(Event::Release { task: i });
                }
            }
            for &next in &consumers[c.task] {
                waiting[next] -= 1;
                if waiting[next] == 0 {
                    ready.push_back(next);
                }
            }
        }
        drop(senders);
    });

    if let Some(e) = failure {
        return Err(e);
    }
    debug_assert_eq!(finished, n);
    stats.tasks_run = finished;
    let outputs = sinks
        .into_iter()
        .map(|s| (s, store[s].take().expect("sink output").1))
        .collect();
    Ok(ExecResult {
        outputs,
        log,
        trace,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn rows_of(d: &Data) -> Vec<Row> {
        match d {
            Data::Rows(r) => r.to_vec(),
            _ => panic!("not rows"),
        }
    }

    fn diamond() -> TaskGraph {
        let mut g = TaskGraph::new();
        let a = g.add("a", 1, vec![], |_| Ok(Data::rows(vec![vec![Value::Int(1)]])));
        let b = g.add("b", 2, vec![a], |ctx| {
            let r = ctx.fetch_rows(0)?;
            Ok(Data::rows(r.iter().map(|x| vec![Value::Int(x[0].as_key().unwrap() + 1)]).collect()))
        });
        let c = g.add("c", 3, vec![a], |ctx| {
            let r = ctx.fetch_rows(0)?;
            Ok(Data::rows(r.iter().map(|x| vec![Value::Int(x[0].as_key().unwrap() * 10)]).collect()))
        });
        g.add("d", 4, vec![b, c], |ctx| {
            let mut out = ctx.fetch_rows(0)?.to_vec();
            out.extend(ctx.fetch_rows(1)?.iter().cloned());
            Ok(Data::rows(out))
        });
        g
    }

    #[test]
    fn diamond_runs_once_per_task() {
        for workers in [1, 2, 8] {
            let res = execute(diamond(), workers).unwrap();
            let out = rows_of(&res.outputs[&3]);
            assert_eq!(out, vec![vec![Value::Int(2)], vec![Value::Int(10)]]);
            let starts = res.log.iter().filter(|e| matches!(e, Event::Start { .. })).count();
            let finishes = res.log.iter().filter(|e| matches!(e, Event::Finish { .. })).count();
            assert_eq!((starts, finishes), (4, 4));
            let releases: Vec<_> = res
                .log
                .iter()
                .filter_map(|e| match e {
                    Event::Release { task } => Some(*task),
                    _ => None,
                })
                .collect();
            assert_eq!(releases.len(), 3);
        }
    }

    #[test]
    fn single_worker_never_transfers() {
        let res = execute(diamond(), 1).unwrap();
        assert_eq!(res.stats.bytes_transferred, 0);
        assert!(res.stats.bytes_fetched > 0);
    }

    #[test]
    fn panics_are_reported() {
        let mut g = TaskGraph::new();
        let a = g.add("a", 1, vec![], |_| Ok(Data::rows(vec![])));
        g.add("boom", 2, vec![a], |_| panic!("kaput"));
        match execute(g, 2) {
            Err(ExecError::TaskPanicked { task, cause, .. }) => {
                assert_eq!(task, 1);
                assert!(cause.contains("kaput"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unfetched_inputs_cost_nothing() {
        let mut g = TaskGraph::new();
        let a = g.add("a", 1, vec![], |_| Ok(Data::rows(vec![vec![Value::Int(5)]; 100])));
        g.add("skip", 2, vec![a], |_| Ok(Data::rows(vec![])));
        let res = execute(g, 4).unwrap();
        assert_eq!(res.stats.fetched_from[0], 0);
    }

    #[test]
    fn zero_workers_rejected() {
        assert_eq!(execute(TaskGraph::new(), 0).unwrap_err(), ExecError::ZeroWorkers);
    }
}
