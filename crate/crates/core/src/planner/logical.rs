use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::sql::{BoundExpr, BoundPredicate, BoundQuery, BoundUdf, ColumnRef, OutputItem};
use crate::storage::Field;

#[derive(Debug, Clone, PartialEq)]
pub enum LogicalPlan {
    Scan {
        table: String,
        /// Columns read, in table order.
        fields: Vec<Field>,
        sort_key: Option<String>,
    },
    Filter {
        input: Box<LogicalPlan>,
        predicates: Vec<BoundPredicate>,
    },
    Project {
        input: Box<LogicalPlan>,
        exprs: Vec<(String, BoundExpr)>,
    },
    Join {
        left: Box<LogicalPlan>,
        right: Box<LogicalPlan>,
        left_key: String,
        right_key: String,
    },
    Aggregate {
        input: Box<LogicalPlan>,
        group_by: Vec<String>,
        output: Vec<OutputItem>,
    },
    Sort {
        input: Box<LogicalPlan>,
        keys: Vec<(String, bool)>,
    },
    /// `canonical` limits take the first rows of the fully sorted input;
    /// otherwise the input order is kept.
    Limit {
        input: Box<LogicalPlan>,
        n: u64,
        canonical: bool,
    },
    Udf {
        input: Box<LogicalPlan>,
        udf: BoundUdf,
    },
}

impl LogicalPlan {
    /// Output columns. UDF output is only known at run time and is empty
    /// here.
    pub fn layout(&self) -> Vec<Field> {
        match self {
            LogicalPlan::Scan { fields, .. } => fields.clone(),
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. } => input.layout(),
            LogicalPlan::Project { exprs, .. } => exprs
                .iter()
                .map(|(n, e)| Field::new(n.clone(), e.data_type()))
                .collect(),
            LogicalPlan::Join { left, right, .. } => {
                let mut l = left.layout();
                l.extend(right.layout());
                l
            }
            LogicalPlan::Aggregate { output, .. } => output
                .iter()
                .map(|o| Field::new(o.name(), o.data_type()))
                .collect(),
            LogicalPlan::Udf { .. } => Vec::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LogicalPlan::Scan { .. } => "scan",
            LogicalPlan::Filter { .. } => "filter",
            LogicalPlan::Project { .. } => "project",
            LogicalPlan::Join { .. } => "join",
            LogicalPlan::Aggregate { .. } => "aggregate",
            LogicalPlan::Sort { .. } => "sort",
            LogicalPlan::Limit { .. } => "limit",
            LogicalPlan::Udf { .. } => "udf_apply",
        }
    }

    pub fn inputs(&self) -> Vec<&LogicalPlan> {
        match self {
            LogicalPlan::Scan { .. } => Vec::new(),
            LogicalPlan::Join { left, right, .. } => vec![left, right],
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::Project { input, .. }
            | LogicalPlan::Aggregate { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. }
            | LogicalPlan::Udf { input, .. } => vec![input],
        }
    }

    /// Indented outline, root first, for debugging and tests.
    pub fn outline(&self) -> String {
        let mut out = String::new();
        self.outline_into(0, &mut out);
        out
    }

    fn outline_into(&self, depth: usize, out: &mut String) {
        let detail = match self {
            LogicalPlan::Scan { table, .. } => table.clone(),
            LogicalPlan::Filter { predicates, .. } => predicates
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(" AND "),
            LogicalPlan::Join {
                left_key, right_key, ..
            } => format!("{left_key} = {right_key}"),
            _ => String::new(),
        };
        let _ = writeln!(out, "{}{}({detail})", "  ".repeat(depth), self.name());
        for i in self.inputs() {
            i.outline_into(depth + 1, out);
        }
    }
}

fn column_names(exprs: impl IntoIterator<Item = Vec<String>>) -> BTreeSet<String> {
    exprs.into_iter().flatten().collect()
}

/// Lowers a bound query: per-table scan chains with single-table
/// predicates pushed down and unused columns pruned, a left-deep join in
/// FROM order, then aggregation / projection, sort, limit and UDF.
pub fn build_logical_plan(q: &BoundQuery) -> LogicalPlan {
    let n = q.tables.len();
    // Predicates touching at most one table run in that table's chain;
    // constant predicates go to the first table.
    let mut local: Vec<Vec<BoundPredicate>> = vec![Vec::new(); n];
    let mut pending: Vec<BoundPredicate> = Vec::new();
    for p in &q.predicates {
        let t = p.tables();
        match t.len() {
            0 => local[0].push(p.clone()),
            1 => local[*t.first().unwrap()].push(p.clone()),
            _ => pending.push(p.clone()),
        }
    }

    let mut upstream: Vec<Vec<String>> = pending.iter().map(|p| p.columns()).collect();
    upstream.push(q.group_by.iter().map(|g| g.name.clone()).collect());
    for o in &q.output {
        let mut v = Vec::new();
        match o {
            OutputItem::Scalar { expr, .. } => expr.columns(&mut v),
            OutputItem::Group { column, .. } => v.push(column.name.clone()),
            OutputItem::Agg { arg: Some(a), .. } => a.columns(&mut v),
            OutputItem::Agg { arg: None, .. } => {}
        }
        upstream.push(v);
    }
    if let Some(u) = &q.udf {
        for a in &u.args {
            let mut v = Vec::new();
            a.columns(&mut v);
            upstream.push(v);
        }
    }
    let needed_above = column_names(upstream);

    let chains: Vec<LogicalPlan> = (0..n)
        .map(|t| {
            let table = &q.tables[t];
            let read = q.needed_columns(t);
            let fields: Vec<Field> = read
                .iter()
                .map(|c| table.schema.field(c).unwrap().clone())
                .collect();
            let mut plan = LogicalPlan::Scan {
                table: table.name.clone(),
                fields,
                sort_key: table.sort_key.clone(),
            };
            if !local[t].is_empty() {
                plan = LogicalPlan::Filter {
                    input: Box::new(plan),
                    predicates: std::mem::take(&mut local[t]),
                };
                let keep: Vec<String> = read
                    .iter()
                    .filter(|c| needed_above.contains(*c))
                    .cloned()
                    .collect();
                if keep.len() < read.len() && !keep.is_empty() {
                    plan = project_columns(plan, &keep, t);
                }
            }
            plan
        })
        .collect();

    let mut chains: Vec<Option<LogicalPlan>> = chains.into_iter().map(Some).collect();
    let mut plan = chains[0].take().unwrap();
    let mut joined = BTreeSet::from([0usize]);
    while joined.len() < n {
        let (t, pred_idx) = next_join(q, &pending, &joined);
        let p = pending.remove(pred_idx);
        let (a, b) = p.equi_join().unwrap();
        let (old, new) = if a.table == t { (b, a) } else { (a, b) };
        plan = LogicalPlan::Join {
            left: Box::new(plan),
            right: Box::new(chains[t].take().unwrap()),
            left_key: old.name.clone(),
            right_key: new.name.clone(),
        };
        joined.insert(t);
        let (ready, rest): (Vec<_>, Vec<_>) = pending
            .into_iter()
            .partition(|p| p.tables().is_subset(&joined));
        pending = rest;
        if !ready.is_empty() {
            plan = LogicalPlan::Filter {
                input: Box::new(plan),
                predicates: ready,
            };
        }
    }

    if let Some(udf) = &q.udf {
        plan = LogicalPlan::Project {
            input: Box::new(plan),
            exprs: udf.arg_names.iter().cloned().zip(udf.args.iter().cloned()).collect(),
        };
        if let Some(n) = q.limit {
            plan = LogicalPlan::Limit {
                input: Box::new(plan),
                n,
                canonical: true,
            };
        }
        return LogicalPlan::Udf {
            input: Box::new(plan),
            udf: udf.clone(),
        };
    }

    plan = if q.is_aggregate() {
        LogicalPlan::Aggregate {
            input: Box::new(plan),
            group_by: q.group_by.iter().map(|g| g.name.clone()).collect(),
            output: q.output.clone(),
        }
    } else {
        LogicalPlan::Project {
            input: Box::new(plan),
            exprs: q
                .output
                .iter()
                .map(|o| match o {
                    OutputItem::Scalar { expr, name } => (name.clone(), expr.clone()),
                    _ => unreachable!("non-aggregate output"),
                })
                .collect(),
        }
    };
    if !q.order_by.is_empty() {
        plan = LogicalPlan::Sort {
            input: Box::new(plan),
            keys: q
                .order_by
                .iter()
                .map(|&(i, desc)| (q.output[i].name().to_string(), desc))
                .collect(),
        };
    }
    if let Some(n) = q.limit {
        plan = LogicalPlan::Limit {
            input: Box::new(plan),
            n,
            canonical: q.order_by.is_empty(),
        };
    }
    plan
}

fn project_columns(input: LogicalPlan, keep: &[String], table: usize) -> LogicalPlan {
    let layout = input.layout();
    let exprs = keep
        .iter()
        .map(|c| {
            let f = layout.iter().find(|f| &f.name == c).unwrap();
            (
                c.clone(),
                BoundExpr::Column(ColumnRef {
                    name: c.clone(),
                    table,
                    data_type: f.data_type,
                }),
            )
        })
        .collect();
    LogicalPlan::Project {
        input: Box::new(input),
        exprs,
    }
}

/// The next table in FROM order reachable by an equi-join, and the
/// predicate to join on: one keyed on the new table's sort column if
/// possible.
fn next_join(q: &BoundQuery, pending: &[BoundPredicate], joined: &BTreeSet<usize>) -> (usize, usize) {
    for t in 0..q.tables.len() {
        if joined.contains(&t) {
            continue;
        }
        let candidates: Vec<(usize, &ColumnRef)> = pending
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let (a, b) = p.equi_join()?;
                if a.table == t && joined.contains(&b.table) {
                    Some((i, a))
                } else if b.table == t && joined.contains(&a.table) {
                    Some((i, b))
                } else {
                    None
                }
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let sort_key = q.tables[t].sort_key.as_deref();
        let pick = candidates
            .iter()
            .find(|(_, c)| Some(c.name.as_str()) == sort_key)
            .unwrap_or(&candidates[0]);
        return (t, pick.0);
    }
    unreachable!("binding guarantees every table is joined")
}
