//! Single-threaded reference evaluator used as the oracle for engine
//! results. Shares nothing with the planner or executor beyond the bound
//! query and the scalar semantics.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::agg::AggFunction;
use crate::engine::QueryResult;
use crate::sql::{arith, compare, BoundExpr, BoundPredicate, BoundQuery, OutputItem};
use crate::storage::Catalog;
use crate::udf::{ColumnFrame, UdfRegistry};
use crate::value::{cmp_rows, Row, Value};
use crate::Error;

/// Joined rows are the concatenation of full table rows; `offsets[t]` is
/// where table `t` starts.
struct Env {
    offsets: Vec<Option<usize>>,
    schemas: Vec<Vec<String>>,
}

impl Env {
    fn pos(&self, table: usize, name: &str) -> usize {
        let base = self.offsets[table].expect("table joined");
        base + self.schemas[table].iter().position(|n| n == name).expect("bound column")
    }

    fn eval(&self, e: &BoundExpr, row: &[Value]) -> Value {
        match e {
            BoundExpr::Column(c) => row[self.pos(c.table, &c.name)].clone(),
            BoundExpr::Literal(v) => v.clone(),
            BoundExpr::Binary { op, left, right, .. } => {
                arith(*op, &self.eval(left, row), &self.eval(right, row))
            }
        }
    }

    fn holds(&self, p: &BoundPredicate, row: &[Value]) -> bool {
        compare(p.op, &self.eval(&p.left, row), &self.eval(&p.right, row))
    }
}

fn join(left: Vec<Row>, lpos: usize, right: &[Row], rpos: usize) -> Vec<Row> {
    let mut by_key: HashMap<&Value, Vec<usize>> = HashMap::new();
    for (i, r) in right.iter().enumerate() {
        by_key.entry(&r[rpos]).or_default().push(i);
    }
    let mut out = Vec::new();
    for l in left {
        if let Some(ms) = by_key.get(&l[lpos]) {
            for &i in ms {
                let mut row = l.clone();
                row.extend(right[i].iter().cloned());
                out.push(row);
            }
        }
    }
    out
}

fn aggregate_values(func: AggFunction, mut vs: Vec<f64>) -> f64 {
    match func {
        AggFunction::Count => vs.len() as f64,
        AggFunction::Sum => vs.iter().sum(),
        AggFunction::Min => vs.iter().copied().fold(f64::INFINITY, f64::min),
        AggFunction::Max => vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        AggFunction::Avg => vs.iter().sum::<f64>() / vs.len() as f64,
        AggFunction::Median => {
            vs.sort_by(f64::total_cmp);
            vs[(vs.len() - 1) / 2]
        }
    }
}

/// Evaluates `q` directly over the raw tables.
pub fn reference_evaluate(q: &BoundQuery, catalog: &Catalog, udfs: &UdfRegistry) -> Result<QueryResult, Error> {
    let n = q.tables.len();
    let mut data = Vec::with_capacity(n);
    for t in &q.tables {
        let handle = catalog.table(&t.name)?;
        data.push(catalog.read_table_rows(&handle)?);
    }
    let mut env = Env {
        offsets: vec![None; n],
        schemas: q.tables.iter().map(|t| t.schema.names()).collect(),
    };
    let mut applied = vec![false; q.predicates.len()];
    let mut joined = BTreeSet::from([0usize]);
    env.offsets[0] = Some(0);
    let mut width = env.schemas[0].len();
    let mut rows = std::mem::take(&mut data[0]);

    let apply_ready = |rows: Vec<Row>, env: &Env, joined: &BTreeSet<usize>, applied: &mut Vec<bool>| {
        let mut ready: Vec<&BoundPredicate> = Vec::new();
        for (i, p) in q.predicates.iter().enumerate() {
            if !applied[i] && p.tables().is_subset(joined) {
                applied[i] = true;
                ready.push(p);
            }
        }
        rows.into_iter()
            .filter(|r| ready.iter().all(|p| env.holds(p, r)))
            .collect::<Vec<Row>>()
    };
    rows = apply_ready(rows, &env, &joined, &mut applied);

    while joined.len() < n {
        let (pi, t) = q
            .predicates
            .iter()
            .enumerate()
            .filter(|(i, _)| !applied[*i])
            .find_map(|(i, p)| {
                let (a, b) = p.equi_join()?;
                if joined.contains(&a.table) && !joined.contains(&b.table) {
                    Some((i, b.table))
                } else if joined.contains(&b.table) && !joined.contains(&a.table) {
                    Some((i, a.table))
                } else {
                    None
                }
            })
            .expect("bound queries are connected");
        let (a, b) = q.predicates[pi].equi_join().unwrap();
        let (old, new) = if a.table == t { (b, a) } else { (a, b) };
        let lpos = env.pos(old.table, &old.name);
        let rpos = env.schemas[t].iter().position(|c| *c == new.name).unwrap();
        rows = join(rows, lpos, &data[t], rpos);
        applied[pi] = true;
        env.offsets[t] = Some(width);
        width += env.schemas[t].len();
        joined.insert(t);
        rows = apply_ready(rows, &env, &joined, &mut applied);
    }

    if let Some(udf) = &q.udf {
        let mut args: Vec<Row> = rows
            .iter()
            .map(|r| udf.args.iter().map(|e| env.eval(e, r)).collect())
            .collect();
        if let Some(limit) = q.limit {
            args.sort_by(|a, b| cmp_rows(a, b));
            args.truncate(limit as usize);
        }
        let mut frames = Vec::new();
        let mut start = 0;
        for &c in &udf.arg_column_counts {
            let cols: Vec<Row> = args.iter().map(|r| r[start..start + c].to_vec()).collect();
            frames.push(ColumnFrame::from_rows(udf.arg_names[start..start + c].to_vec(), &cols)?);
            start += c;
        }
        let out = udfs.invoke(&udf.name, &frames)?;
        return Ok(QueryResult::from_udf(&udf.name, out));
    }

    let mut out: Vec<Row> = if q.is_aggregate() {
        let mut order: Vec<Vec<Value>> = Vec::new();
        let mut groups: HashMap<Vec<Value>, Vec<Row>> = HashMap::new();
        for r in rows {
            let key: Vec<Value> = q.group_by.iter().map(|c| r[env.pos(c.table, &c.name)].clone()).collect();
            let entry = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                Vec::new()
            });
            entry.push(r);
        }
        order
            .iter()
            .map(|key| {
                let members = &groups[key];
                q.output
                    .iter()
                    .map(|o| match o {
                        OutputItem::Group { column, .. } => {
                            let i = q.group_by.iter().position(|g| g.name == column.name).unwrap();
                            key[i].clone()
                        }
                        OutputItem::Agg { func, arg, .. } => {
                            let vs: Vec<f64> = members
                                .iter()
                                .map(|r| match arg {
                                    Some(e) => env.eval(e, r).as_f64().unwrap_or(f64::NAN),
                                    None => 1.0,
                                })
                                .collect();
                            let v = aggregate_values(*func, vs);
                            if *func == AggFunction::Count {
                                Value::Int(v as i64)
                            } else {
                                Value::Float(v)
                            }
                        }
                        OutputItem::Scalar { expr, .. } => env.eval(expr, &members[0]),
                    })
                    .collect()
            })
            .collect()
    } else {
        rows.iter()
            .map(|r| {
                q.output
                    .iter()
                    .map(|o| match o {
                        OutputItem::Scalar { expr, .. } => env.eval(expr, r),
                        _ => unreachable!(),
                    })
                    .collect()
            })
            .collect()
    };

    if !q.order_by.is_empty() {
        out.sort_by(|a, b| {
            for &(i, desc) in &q.order_by {
                let o = a[i].total_cmp(&b[i]);
                let o = if desc { o.reverse() } else { o };
                if o != Ordering::Equal {
                    return o;
                }
            }
            cmp_rows(a, b)
        });
    } else if q.limit.is_some() {
        out.sort_by(|a, b| cmp_rows(a, b));
    }
    if let Some(l) = q.limit {
        out.truncate(l as usize);
    }
    Ok(QueryResult::from_rows(q.output_names(), out))
}

/// Relative tolerance for float cells.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

pub fn values_match(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => {
            x == y
                || (x.is_nan() && y.is_nan())
                || (x - y).abs() <= FLOAT_TOLERANCE * x.abs().max(y.abs()) + 1e-12
        }
        _ => a == b,
    }
}

/// Compares two results. Unordered results are compared as sorted
/// multisets; ordered ones row by row.
pub fn results_match(engine: &QueryResult, oracle: &QueryResult, ordered: bool) -> Result<(), String> {
    if engine.columns != oracle.columns {
        return Err(format!("columns {:?} vs {:?}", engine.columns, oracle.columns));
    }
    if engine.rows.len() != oracle.rows.len() {
        return Err(format!("{} rows vs {} rows", engine.rows.len(), oracle.rows.len()));
    }
    let (mut a, mut b) = (engine.rows.clone(), oracle.rows.clone());
    if !ordered {
        a.sort_by(|x, y| cmp_rows(x, y));
        b.sort_by(|x, y| cmp_rows(x, y));
    }
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if x.len() != y.len() || !x.iter().zip(y).all(|(u, v)| values_match(u, v)) {
            return Err(format!("row {i}: {x:?} vs {y:?}"));
        }
    }
    Ok(())
}
