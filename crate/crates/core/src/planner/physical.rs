use std::collections::BTreeMap;
use std::fmt;

use super::logical::LogicalPlan;
use crate::sql::{BoundExpr, BoundPredicate, BoundUdf, OutputItem};
use crate::storage::Field;

/// One value of an operator's metadata record.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaValue {
    Text(String),
    Int(i64),
    Bool(bool),
    Texts(Vec<String>),
    Fields(Vec<Field>),
    Predicates(Vec<BoundPredicate>),
    Exprs(Vec<(String, BoundExpr)>),
    Outputs(Vec<OutputItem>),
    SortKeys(Vec<(String, bool)>),
    Udf(Box<BoundUdf>),
}

impl fmt::Display for MetaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T>(f: &mut fmt::Formatter<'_>, xs: &[T], item: impl Fn(&T) -> String) -> fmt::Result {
            let parts: Vec<String> = xs.iter().map(item).collect();
            write!(f, "[{}]", parts.join(", "))
        }
        match self {
            MetaValue::Text(s) => f.write_str(s),
            MetaValue::Int(v) => write!(f, "{v}"),
            MetaValue::Bool(b) => write!(f, "{b}"),
            MetaValue::Texts(v) => list(f, v, |s| s.clone()),
            MetaValue::Fields(v) => list(f, v, |x| format!("{}:{}", x.name, x.data_type)),
            MetaValue::Predicates(v) => list(f, v, |p| p.to_string()),
            MetaValue::Exprs(v) => list(f, v, |(n, e)| format!("{n}={e}")),
            MetaValue::Outputs(v) => list(f, v, |o| o.name().to_string()),
            MetaValue::SortKeys(v) => list(f, v, |(k, d)| format!("{k}{}", if *d { " DESC" } else { "" })),
            MetaValue::Udf(u) => write!(f, "{}", u.name),
        }
    }
}

pub type Meta = BTreeMap<String, MetaValue>;

/// `(k, o, d)`: key, operator tag, metadata; plus explicit input keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalOp {
    pub key: u32,
    pub op_type: String,
    pub meta: Meta,
    pub children: Vec<u32>,
}

fn meta<const N: usize>(entries: [(&str, MetaValue); N]) -> Meta {
    entries
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

impl PhysicalOp {
    pub fn new(key: u32, op_type: &str, meta: Meta, children: Vec<u32>) -> PhysicalOp {
        PhysicalOp {
            key,
            op_type: op_type.to_string(),
            meta,
            children,
        }
    }

    pub fn scan(key: u32, table: &str, fields: Vec<Field>, sort_key: Option<&str>) -> PhysicalOp {
        let mut m = meta([
            ("table", MetaValue::Text(table.to_string())),
            ("columns", MetaValue::Fields(fields)),
        ]);
        if let Some(s) = sort_key {
            m.insert("sort_key".into(), MetaValue::Text(s.to_string()));
        }
        PhysicalOp::new(key, "scan", m, Vec::new())
    }

    pub fn filter(key: u32, child: u32, predicates: Vec<BoundPredicate>) -> PhysicalOp {
        PhysicalOp::new(key, "filter", meta([("predicates", MetaValue::Predicates(predicates))]), vec![child])
    }

    pub fn project(key: u32, child: u32, exprs: Vec<(String, BoundExpr)>) -> PhysicalOp {
        PhysicalOp::new(key, "project", meta([("exprs", MetaValue::Exprs(exprs))]), vec![child])
    }

    /// `indexed_side` names the input whose base table's learned index
    /// drives the join (`"left"` / `"right"`); `None` means hash join.
    pub fn join(
        key: u32,
        left: u32,
        right: u32,
        left_key: &str,
        right_key: &str,
        indexed_side: Option<&str>,
    ) -> PhysicalOp {
        let mut m = meta([
            ("left_key", MetaValue::Text(left_key.to_string())),
            ("right_key", MetaValue::Text(right_key.to_string())),
            (
                "strategy",
                MetaValue::Text(if indexed_side.is_some() { "indexed" } else { "hash" }.into()),
            ),
        ]);
        if let Some(side) = indexed_side {
            m.insert("indexed_side".into(), MetaValue::Text(side.to_string()));
        }
        PhysicalOp::new(key, "join", m, vec![left, right])
    }

    pub fn aggregate(key: u32, child: u32, group_by: Vec<String>, output: Vec<OutputItem>) -> PhysicalOp {
        PhysicalOp::new(
            key,
            "aggregate",
            meta([
                ("group_by", MetaValue::Texts(group_by)),
                ("aggregates", MetaValue::Outputs(output)),
            ]),
            vec![child],
        )
    }

    pub fn sort(key: u32, child: u32, keys: Vec<(String, bool)>) -> PhysicalOp {
        PhysicalOp::new(key, "sort", meta([("keys", MetaValue::SortKeys(keys))]), vec![child])
    }

    pub fn limit(key: u32, child: u32, n: u64, canonical: bool) -> PhysicalOp {
        PhysicalOp::new(
            key,
            "limit",
            meta([
                ("n", MetaValue::Int(n as i64)),
                ("canonical", MetaValue::Bool(canonical)),
            ]),
            vec![child],
        )
    }

    pub fn udf_apply(key: u32, child: u32, udf: BoundUdf) -> PhysicalOp {
        PhysicalOp::new(key, "udf_apply", meta([("udf", MetaValue::Udf(Box::new(udf)))]), vec![child])
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperatorGroup {
    pub ops: Vec<PhysicalOp>,
}

/// Ordered groups of dependent operators. Keys are unique and every
/// operator's inputs come earlier in group/tuple order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhysicalPlan {
    pub groups: Vec<OperatorGroup>,
}

impl PhysicalPlan {
    pub fn op_count(&self) -> usize {
        self.groups.iter().map(|g| g.ops.len()).sum()
    }

    pub fn ops(&self) -> impl Iterator<Item = &PhysicalOp> {
        self.groups.iter().flat_map(|g| g.ops.iter())
    }

    /// Group shape as operator tags, e.g. `[["scan","filter"],["scan"],...]`.
    pub fn shape(&self) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|g| g.ops.iter().map(|o| o.op_type.clone()).collect())
            .collect()
    }
}

impl fmt::Display for PhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.groups.iter().enumerate() {
            writeln!(f, "group {i}")?;
            for op in &g.ops {
                let children: Vec<String> = op.children.iter().map(|c| format!("k{c}")).collect();
                write!(f, "  k{} {} [{}]", op.key, op.op_type, children.join(", "))?;
                for (k, v) in &op.meta {
                    write!(f, " {k}={v}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Whether `plan` is a scan chain whose base table is sorted on `key` and
/// still carries that column, so its partitions line up with the table's
/// learned index.
fn index_eligible(plan: &LogicalPlan, key: &str) -> bool {
    match plan {
        LogicalPlan::Scan { sort_key, fields, .. } => {
            sort_key.as_deref() == Some(key) && fields.iter().any(|f| f.name == key)
        }
        LogicalPlan::Filter { input, .. } => index_eligible(input, key),
        LogicalPlan::Project { input, exprs } => {
            exprs
                .iter()
                .any(|(n, e)| n == key && matches!(e, BoundExpr::Column(c) if c.name == key))
                && index_eligible(input, key)
        }
        _ => false,
    }
}

/// Groups the plan into maximal single-input chains; a join starts a new
/// group after its inputs' groups. Keys are assigned in emission order.
pub fn to_physical(lp: &LogicalPlan) -> PhysicalPlan {
    let mut plan = PhysicalPlan::default();
    let mut next = 1u32;
    lower(lp, &mut plan, &mut next);
    plan
}

fn lower(lp: &LogicalPlan, plan: &mut PhysicalPlan, next: &mut u32) -> u32 {
    let take = |next: &mut u32| {
        let k = *next;
        *next += 1;
        k
    };
    let op = match lp {
        LogicalPlan::Scan {
            table,
            fields,
            sort_key,
        } => {
            plan.groups.push(OperatorGroup::default());
            PhysicalOp::scan(take(next), table, fields.clone(), sort_key.as_deref())
        }
        LogicalPlan::Join {
            left,
            right,
            left_key,
            right_key,
        } => {
            let l = lower(left, plan, next);
            let r = lower(right, plan, next);
            let side = if index_eligible(right, right_key) {
                Some("right")
            } else if index_eligible(left, left_key) {
                Some("left")
            } else {
                None
            };
            plan.groups.push(OperatorGroup::default());
            PhysicalOp::join(take(next), l, r, left_key, right_key, side)
        }
        LogicalPlan::Filter { input, predicates } => {
            let c = lower(input, plan, next);
            PhysicalOp::filter(take(next), c, predicates.clone())
        }
        LogicalPlan::Project { input, exprs } => {
            let c = lower(input, plan, next);
            PhysicalOp::project(take(next), c, exprs.clone())
        }
        LogicalPlan::Aggregate {
            input,
            group_by,
            output,
        } => {
            let c = lower(input, plan, next);
            PhysicalOp::aggregate(take(next), c, group_by.clone(), output.clone())
        }
        LogicalPlan::Sort { input, keys } => {
            let c = lower(input, plan, next);
            PhysicalOp::sort(take(next), c, keys.clone())
        }
        LogicalPlan::Limit {
            input,
            n,
            canonical,
        } => {
            let c = lower(input, plan, next);
            PhysicalOp::limit(take(next), c, *n, *canonical)
        }
        LogicalPlan::Udf { input, udf } => {
            let c = lower(input, plan, next);
            PhysicalOp::udf_apply(take(next), c, udf.clone())
        }
    };
    let key = op.key;
    plan.groups.last_mut().unwrap().ops.push(op);
    key
}
