//! Lowering of an engine plan into a task graph over table partitions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use parking_lot::Mutex;

use super::graph::{Data, TaskCtx, TaskGraph, TaskId};
use super::{ExecConfig, ExecutorError};
use crate::agg::{self, AggError, AggFunction, Strategy};
use crate::index::{build_index, bucket_by_partition, LearnedIndex};
use crate::ops::hash_join_rows;
use crate::planner::{EngineMeta, EngineOperator, EnginePlan, JoinSide, TableInfo};
use crate::sql::{OutputItem, RowPredicate, ScalarExpr};
use crate::storage::{Catalog, Field};
use crate::udf::{ColumnFrame, UdfRegistry};
use crate::value::{cmp_rows, Row, Value};

/// Learned indexes by (table, column, partition size).
#[derive(Debug, Default)]
pub struct IndexCache {
    map: Mutex<HashMap<(String, String, usize), Arc<LearnedIndex>>>,
}

impl IndexCache {
    pub fn new() -> IndexCache {
        IndexCache::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.lock().clear();
    }

    pub fn get_or_build(
        &self,
        catalog: &Catalog,
        table: &str,
        column: &str,
        partition_size: usize,
    ) -> Result<Arc<LearnedIndex>, ExecutorError> {
        let key = (table.to_string(), column.to_string(), partition_size);
        if let Some(idx) = self.map.lock().get(&key) {
            return Ok(idx.clone());
        }
        let rel = catalog.relation(table, partition_size)?;
        let idx = Arc::new(build_index(&rel, column)?.with_table(table));
        self.map.lock().insert(key, idx.clone());
        Ok(idx)
    }
}

/// Partitioned output of one engine operator.
#[derive(Debug, Clone)]
struct Stage {
    parts: Vec<(u32, TaskId)>,
    layout: Vec<String>,
}

/// One indexed join, for pruning accounting after execution.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedJoinTasks {
    pub op_key: u32,
    /// Partitions of the indexed input: ordinal and producing task.
    pub a_parts: Vec<(u32, TaskId)>,
    /// Join task per A ordinal.
    pub joins: Vec<(u32, TaskId)>,
}

pub struct Compiled {
    pub graph: TaskGraph,
    pub sink: TaskId,
    pub columns: Vec<Field>,
    pub indexed_joins: Vec<IndexedJoinTasks>,
}

pub struct CompileCtx<'a> {
    pub catalog: &'a Catalog,
    pub udfs: Arc<UdfRegistry>,
    pub indexes: &'a IndexCache,
    pub config: &'a ExecConfig,
}

fn names(fields: &[Field]) -> Vec<String> {
    fields.iter().map(|f| f.name.clone()).collect()
}

fn position(layout: &[String], col: &str, key: u32) -> Result<usize, ExecutorError> {
    layout
        .iter()
        .position(|n| n == col)
        .ok_or_else(|| ExecutorError::Layout {
            key,
            column: col.to_string(),
        })
}

fn missing(key: u32) -> ExecutorError {
    ExecutorError::Layout {
        key,
        column: "<expression>".into(),
    }
}

fn sort_rows(rows: &mut [Row], keys: &[(usize, bool)]) {
    rows.sort_by(|a, b| {
        for &(i, desc) in keys {
            let o = a[i].total_cmp(&b[i]);
            let o = if desc { o.reverse() } else { o };
            if o != Ordering::Equal {
                return o;
            }
        }
        cmp_rows(a, b)
    });
}

fn bucket_of(v: &Value, p: usize) -> u32 {
    let mut h = DefaultHasher::new();
    v.hash(&mut h);
    (h.finish() % p as u64) as u32
}

fn concat_inputs(ctx: &TaskCtx) -> Result<Vec<Row>, String> {
    let mut out = Vec::new();
    for i in 0..ctx.input_count() {
        out.extend(ctx.fetch_rows(i)?.iter().cloned());
    }
    Ok(out)
}

pub fn compile(plan: &EnginePlan, cx: &CompileCtx<'_>) -> Result<Compiled, ExecutorError> {
    let mut graph = TaskGraph::new();
    let mut stages: BTreeMap<u32, Stage> = BTreeMap::new();
    let mut indexed_joins = Vec::new();
    for op in &plan.ops {
        let inputs: Vec<Stage> = op
            .children
            .iter()
            .map(|c| stages[c].clone())
            .collect();
        let stage = compile_op(op, &inputs, cx, &mut graph, &mut indexed_joins)?;
        stages.insert(op.key, stage);
    }
    let root = *plan.roots().first().ok_or(ExecutorError::EmptyPlan)?;
    let root_op = plan.get(root).unwrap();
    let root_stage = &stages[&root];
    let udf_root = matches!(root_op.meta, EngineMeta::ApplyUdf { .. });
    let sink = graph.add(
        "sink",
        0,
        root_stage.parts.iter().map(|p| p.1).collect(),
        move |ctx| {
            if udf_root {
                return Ok((*ctx.fetch(0)).clone());
            }
            Ok(Data::rows(concat_inputs(ctx)?))
        },
    );
    Ok(Compiled {
        graph,
        sink,
        columns: root_op.output_info().columns,
        indexed_joins,
    })
}

fn compile_op(
    op: &EngineOperator,
    inputs: &[Stage],
    cx: &CompileCtx<'_>,
    g: &mut TaskGraph,
    indexed_joins: &mut Vec<IndexedJoinTasks>,
) -> Result<Stage, ExecutorError> {
    let key = op.key;
    let out_layout = names(&op.output_info().columns);
    let single = |g: &mut TaskGraph, label: &str, f: Box<dyn FnOnce(Vec<Row>) -> Result<Data, String> + Send>| {
        let deps = inputs[0].parts.iter().map(|p| p.1).collect();
        let id = g.add(format!("{label}#{key}"), key, deps, move |ctx| f(concat_inputs(ctx)?));
        Stage {
            parts: vec![(1, id)],
            layout: out_layout.clone(),
        }
    };
    Ok(match &op.meta {
        EngineMeta::ReadTable { table, columns, .. } => {
            let rel = cx.catalog.relation(table, cx.config.partition_size)?;
            let cols: Vec<usize> = columns
                .iter()
                .map(|f| {
                    rel.schema.index_of(&f.name).ok_or_else(|| ExecutorError::Layout {
                        key,
                        column: f.name.clone(),
                    })
                })
                .collect::<Result<_, _>>()?;
            let cols = Arc::new(cols);
            let parts = (0..rel.partitions.len())
                .map(|i| {
                    let rel = rel.clone();
                    let cols = cols.clone();
                    let ordinal = rel.partitions[i].ordinal;
                    let id = g.add(format!("read_table#{key}:{ordinal}"), key, vec![], move |_| {
                        let rows = rel.partitions[i]
                            .rows
                            .iter()
                            .map(|r| cols.iter().map(|&c| r[c].clone()).collect())
                            .collect();
                        Ok(Data::rows(rows))
                    });
                    (ordinal, id)
                })
                .collect();
            Stage {
                parts,
                layout: out_layout,
            }
        }
        EngineMeta::Filters { predicates } => {
            let compiled: Vec<RowPredicate> = predicates
                .iter()
                .map(|p| RowPredicate::compile(p, &inputs[0].layout).ok_or_else(|| missing(key)))
                .collect::<Result<_, _>>()?;
            let compiled = Arc::new(compiled);
            map_parts(g, key, "filters", &inputs[0], out_layout, move |rows| {
                rows.iter()
                    .filter(|r| compiled.iter().all(|p| p.eval(r)))
                    .cloned()
                    .collect()
            })
        }
        EngineMeta::SelectColumns { exprs } => {
            let compiled: Vec<ScalarExpr> = exprs
                .iter()
                .map(|(_, e)| ScalarExpr::compile(e, &inputs[0].layout).ok_or_else(|| missing(key)))
                .collect::<Result<_, _>>()?;
            let compiled = Arc::new(compiled);
            map_parts(g, key, "select_columns", &inputs[0], out_layout, move |rows| {
                rows.iter()
                    .map(|r| compiled.iter().map(|e| e.eval(r)).collect())
                    .collect()
            })
        }
        EngineMeta::MergeJoin {
            left_key,
            right_key,
            indexed,
        } => {
            let lpos = position(&inputs[0].layout, left_key, key)?;
            let rpos = position(&inputs[1].layout, right_key, key)?;
            match indexed {
                Some(side) => {
                    let (a_idx, b_idx) = match side {
                        JoinSide::Left => (0, 1),
                        JoinSide::Right => (1, 0),
                    };
                    let (a_pos, b_pos) = if a_idx == 0 { (lpos, rpos) } else { (rpos, lpos) };
                    let info: &TableInfo = &op.inputs[a_idx];
                    let base = info.base_table.clone().ok_or_else(|| ExecutorError::Layout {
                        key,
                        column: "indexed input has no base table".into(),
                    })?;
                    let a_key = if a_idx == 0 { left_key } else { right_key };
                    let idx = cx
                        .indexes
                        .get_or_build(cx.catalog, &base, a_key, cx.config.partition_size)?;
                    let (stage, tasks) =
                        indexed_join(g, key, &inputs[a_idx], &inputs[b_idx], a_pos, b_pos, a_idx == 0, idx, out_layout);
                    indexed_joins.push(tasks);
                    stage
                }
                None => hash_join(g, key, &inputs[0], &inputs[1], lpos, rpos, out_layout),
            }
        }
        EngineMeta::GroupbyAgg { group_by, output } => {
            let layout = &inputs[0].layout;
            let group_pos: Vec<usize> = group_by
                .iter()
                .map(|c| position(layout, c, key))
                .collect::<Result<_, _>>()?;
            let strategy = cx.config.strategy;
            let threads = cx.config.workers;
            let mut items = Vec::new();
            for o in output {
                items.push(match o {
                    OutputItem::Group { column, .. } => OutItem::Group(
                        group_by.iter().position(|g| *g == column.name).ok_or_else(|| missing(key))?,
                    ),
                    OutputItem::Agg { func, arg, .. } => {
                        if !agg::supports(strategy, *func) {
                            return Err(AggError::UnsupportedAggregation {
                                strategy,
                                class: func.class(),
                            }
                            .into());
                        }
                        let arg = match arg {
                            Some(a) => Some(ScalarExpr::compile(a, layout).ok_or_else(|| missing(key))?),
                            None => None,
                        };
                        OutItem::Agg(*func, arg)
                    }
                    OutputItem::Scalar { .. } => return Err(missing(key)),
                });
            }
            single(
                g,
                "groupby_agg",
                Box::new(move |rows| group_aggregate(&rows, &group_pos, &items, strategy, threads)),
            )
        }
        EngineMeta::SortValues { keys } => {
            let layout = &inputs[0].layout;
            let keys: Vec<(usize, bool)> = keys
                .iter()
                .map(|(c, d)| Ok((position(layout, c, key)?, *d)))
                .collect::<Result<_, ExecutorError>>()?;
            let keys = Arc::new(keys);
            let k2 = keys.clone();
            let sorted = map_parts(g, key, "sort_part", &inputs[0], out_layout.clone(), move |rows| {
                let mut rows = rows.to_vec();
                sort_rows(&mut rows, &k2);
                rows
            });
            let deps = sorted.parts.iter().map(|p| p.1).collect();
            let id = g.add(format!("sort_values#{key}"), key, deps, move |ctx| {
                let mut rows = concat_inputs(ctx)?;
                sort_rows(&mut rows, &keys);
                Ok(Data::rows(rows))
            });
            Stage {
                parts: vec![(1, id)],
                layout: out_layout,
            }
        }
        EngineMeta::Head { n, canonical } => {
            let (n, canonical) = (*n as usize, *canonical);
            single(
                g,
                "head",
                Box::new(move |mut rows| {
                    if canonical {
                        rows.sort_by(|a, b| cmp_rows(a, b));
                    }
                    rows.truncate(n);
                    Ok(Data::rows(rows))
                }),
            )
        }
        EngineMeta::ApplyUdf { udf } => {
            let udfs = cx.udfs.clone();
            let udf = udf.clone();
            single(
                g,
                "apply_udf",
                Box::new(move |rows| {
                    let mut frames = Vec::with_capacity(udf.arg_column_counts.len());
                    let mut start = 0;
                    for &count in &udf.arg_column_counts {
                        let cols: Vec<usize> = (start..start + count).collect();
                        let sub: Vec<Row> = rows.iter().map(|r| cols.iter().map(|&c| r[c].clone()).collect()).collect();
                        frames.push(
                            ColumnFrame::from_rows(udf.arg_names[start..start + count].to_vec(), &sub)
                                .map_err(|e| e.to_string())?,
                        );
                        start += count;
                    }
                    udfs.invoke(&udf.name, &frames)
                        .map(Data::Udf)
                        .map_err(|e| e.to_string())
                }),
            )
        }
    })
}

fn map_parts(
    g: &mut TaskGraph,
    key: u32,
    label: &str,
    input: &Stage,
    layout: Vec<String>,
    f: impl Fn(&[Row]) -> Vec<Row> + Send + Sync + 'static,
) -> Stage {
    let f = Arc::new(f);
    let parts = input
        .parts
        .iter()
        .map(|&(ordinal, dep)| {
            let f = f.clone();
            let id = g.add(format!("{label}#{key}:{ordinal}"), key, vec![dep], move |ctx| {
                Ok(Data::rows(f(&ctx.fetch_rows(0)?)))
            });
            (ordinal, id)
        })
        .collect();
    Stage { parts, layout }
}

/// B partitions are bucketed by the A partition their keys probe to; each
/// A partition with a non-empty bucket is joined, the rest are never read.
#[allow(clippy::too_many_arguments)]
fn indexed_join(
    g: &mut TaskGraph,
    key: u32,
    a: &Stage,
    b: &Stage,
    a_pos: usize,
    b_pos: usize,
    a_is_left: bool,
    idx: Arc<LearnedIndex>,
    layout: Vec<String>,
) -> (Stage, IndexedJoinTasks) {
    let annotated: Vec<TaskId> = b
        .parts
        .iter()
        .map(|&(ordinal, dep)| {
            let idx = idx.clone();
            g.add(format!("annotate#{key}:{ordinal}"), key, vec![dep], move |ctx| {
                let rows = ctx.fetch_rows(0)?;
                Ok(Data::Buckets(
                    bucket_by_partition(&idx, &rows, b_pos)
                        .into_iter()
                        .map(|(p, r)| (p, Arc::new(r)))
                        .collect(),
                ))
            })
        })
        .collect();
    let mut joins = Vec::new();
    for &(ordinal, a_task) in &a.parts {
        let n_ann = annotated.len();
        let select = g.add(format!("select#{key}:{ordinal}"), key, annotated.clone(), move |ctx| {
            let mut rows = Vec::new();
            for i in 0..n_ann {
                rows.extend(ctx.fetch_bucket(i, ordinal)?.iter().cloned());
            }
            Ok(Data::rows(rows))
        });
        let join = g.add(format!("join#{key}:{ordinal}"), key, vec![select, a_task], move |ctx| {
            let b_rows = ctx.fetch_rows(0)?;
            if b_rows.is_empty() {
                return Ok(Data::rows(Vec::new()));
            }
            let a_rows = ctx.fetch_rows(1)?;
            Ok(Data::rows(if a_is_left {
                hash_join_rows(&a_rows, a_pos, &b_rows, b_pos)
            } else {
                hash_join_rows(&b_rows, b_pos, &a_rows, a_pos)
            }))
        });
        joins.push((ordinal, join));
    }
    (
        Stage {
            parts: joins.clone(),
            layout,
        },
        IndexedJoinTasks {
            op_key: key,
            a_parts: a.parts.clone(),
            joins,
        },
    )
}

/// Both sides are shuffled into `P` hash buckets and joined bucket-wise.
fn hash_join(
    g: &mut TaskGraph,
    key: u32,
    left: &Stage,
    right: &Stage,
    lpos: usize,
    rpos: usize,
    layout: Vec<String>,
) -> Stage {
    let p = left.parts.len().max(right.parts.len()).max(1);
    let mut shuffle = |side: &Stage, pos: usize, tag: &str| -> Vec<TaskId> {
        side.parts
            .iter()
            .map(|&(ordinal, dep)| {
                g.add(format!("shuffle_{tag}#{key}:{ordinal}"), key, vec![dep], move |ctx| {
                    let mut buckets: BTreeMap<u32, Vec<Row>> = BTreeMap::new();
                    for r in ctx.fetch_rows(0)?.iter() {
                        buckets.entry(bucket_of(&r[pos], p)).or_default().push(r.clone());
                    }
                    Ok(Data::Buckets(buckets.into_iter().map(|(k, v)| (k, Arc::new(v))).collect()))
                })
            })
            .collect()
    };
    let ls = shuffle(left, lpos, "l");
    let rs = shuffle(right, rpos, "r");
    let nl = ls.len();
    let nr = rs.len();
    let deps: Vec<TaskId> = ls.iter().chain(rs.iter()).copied().collect();
    let parts = (0..p as u32)
        .map(|j| {
            let id = g.add(format!("hash_join#{key}:{j}"), key, deps.clone(), move |ctx| {
                let mut l = Vec::new();
                for i in 0..nl {
                    l.extend(ctx.fetch_bucket(i, j)?.iter().cloned());
                }
                let mut r = Vec::new();
                for i in nl..nl + nr {
                    r.extend(ctx.fetch_bucket(i, j)?.iter().cloned());
                }
                Ok(Data::rows(hash_join_rows(&l, lpos, &r, rpos)))
            });
            (j + 1, id)
        })
        .collect();
    Stage { parts, layout }
}

enum OutItem {
    /// Index into the group-by columns.
    Group(usize),
    Agg(AggFunction, Option<ScalarExpr>),
}

/// Groups are numbered in first-seen order and each aggregate runs
/// through the configured parallel strategy.
fn group_aggregate(
    rows: &[Row],
    group_pos: &[usize],
    items: &[OutItem],
    strategy: Strategy,
    threads: usize,
) -> Result<Data, String> {
    let mut ids: HashMap<Vec<Value>, i64> = HashMap::new();
    let mut groups: Vec<Vec<Value>> = Vec::new();
    let mut row_ids = Vec::with_capacity(rows.len());
    for r in rows {
        let k: Vec<Value> = group_pos.iter().map(|&i| r[i].clone()).collect();
        let id = *ids.entry(k.clone()).or_insert_with(|| {
            groups.push(k);
            groups.len() as i64 - 1
        });
        row_ids.push(id);
    }
    let mut columns: Vec<Option<BTreeMap<i64, f64>>> = Vec::with_capacity(items.len());
    for item in items {
        columns.push(match item {
            OutItem::Group(_) => None,
            OutItem::Agg(func, arg) => {
                let records: Vec<(i64, f64)> = rows
                    .iter()
                    .zip(&row_ids)
                    .map(|(r, &id)| {
                        let v = match arg {
                            Some(e) if *func != AggFunction::Count => e.eval(r).as_f64().unwrap_or(f64::NAN),
                            _ => 1.0,
                        };
                        (id, v)
                    })
                    .collect();
                Some(agg::aggregate(&records, *func, strategy, threads).map_err(|e| e.to_string())?)
            }
        });
    }
    let out = groups
        .iter()
        .enumerate()
        .map(|(id, g)| {
            items
                .iter()
                .zip(&columns)
                .map(|(item, col)| match item {
                    OutItem::Group(i) => g[*i].clone(),
                    OutItem::Agg(func, _) => {
                        let v = col.as_ref().unwrap()[&(id as i64)];
                        if *func == AggFunction::Count {
                            Value::Int(v as i64)
                        } else {
                            Value::Float(v)
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(Data::rows(out))
}
