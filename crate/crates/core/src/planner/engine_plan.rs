//! Conversion of grouped physical operators into engine operators with
//! typed metadata and resolved input relations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use super::physical::{MetaValue, PhysicalOp, PhysicalPlan};
use crate::sql::{BoundExpr, BoundPredicate, BoundUdf, OutputItem};
use crate::storage::Field;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("unknown operator type `{op_type}` (key {key})")]
    UnknownOperatorType { key: u32, op_type: String },
    #[error("operator {key}: missing or malformed metadata field `{field}`")]
    MalformedMetadata { key: u32, field: String },
    #[error("operator {key} depends on undefined operator {child}")]
    DanglingChild { key: u32, child: u32 },
    #[error("duplicate operator key {0}")]
    DuplicateKey(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EngineOpKind {
    ReadTable,
    Filters,
    SelectColumns,
    MergeJoin,
    GroupbyAgg,
    SortValues,
    Head,
    ApplyUdf,
}

impl EngineOpKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineOpKind::ReadTable => "read_table",
            EngineOpKind::Filters => "filters",
            EngineOpKind::SelectColumns => "select_columns",
            EngineOpKind::MergeJoin => "merge_join",
            EngineOpKind::GroupbyAgg => "groupby_agg",
            EngineOpKind::SortValues => "sort_values",
            EngineOpKind::Head => "head",
            EngineOpKind::ApplyUdf => "apply_udf",
        }
    }

    /// Maps a physical operator tag to its engine counterpart.
    pub fn convert(op_type: &str) -> Option<EngineOpKind> {
        Some(match op_type {
            "scan" => EngineOpKind::ReadTable,
            "filter" => EngineOpKind::Filters,
            "project" => EngineOpKind::SelectColumns,
            "join" => EngineOpKind::MergeJoin,
            "aggregate" => EngineOpKind::GroupbyAgg,
            "sort" => EngineOpKind::SortValues,
            "limit" => EngineOpKind::Head,
            "udf_apply" => EngineOpKind::ApplyUdf,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            EngineOpKind::ReadTable => 0,
            EngineOpKind::MergeJoin => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for EngineOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineMeta {
    ReadTable {
        table: String,
        columns: Vec<Field>,
        sort_key: Option<String>,
    },
    Filters {
        predicates: Vec<BoundPredicate>,
    },
    SelectColumns {
        exprs: Vec<(String, BoundExpr)>,
    },
    /// `indexed` names the input whose learned index drives the join;
    /// `None` is a partitioned hash join.
    MergeJoin {
        left_key: String,
        right_key: String,
        indexed: Option<JoinSide>,
    },
    GroupbyAgg {
        group_by: Vec<String>,
        output: Vec<OutputItem>,
    },
    SortValues {
        keys: Vec<(String, bool)>,
    },
    Head {
        n: u64,
        canonical: bool,
    },
    ApplyUdf {
        udf: BoundUdf,
    },
}

/// What an operator knows about one of its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TableInfo {
    /// Name in the plan environment: the table for `read_table`, else `r<key>`.
    pub relation: String,
    pub columns: Vec<Field>,
    /// Column the partitions are range-sorted on, if still aligned with the
    /// base table's index.
    pub sorted_on: Option<String>,
    /// Base table whose partitions this input still mirrors.
    pub base_table: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOperator {
    pub key: u32,
    pub kind: EngineOpKind,
    pub meta: EngineMeta,
    pub children: Vec<u32>,
    pub inputs: Vec<TableInfo>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnginePlan {
    /// Topological order: inputs always precede consumers.
    pub ops: Vec<EngineOperator>,
    /// Relation name → output columns.
    pub name_env: BTreeMap<String, Vec<Field>>,
}

fn malformed(key: u32, field: &str) -> PlanError {
    PlanError::MalformedMetadata {
        key,
        field: field.to_string(),
    }
}

fn text(op: &PhysicalOp, field: &str) -> Result<String, PlanError> {
    match op.meta.get(field) {
        Some(MetaValue::Text(s)) => Ok(s.clone()),
        _ => Err(malformed(op.key, field)),
    }
}

/// Typed metadata for one operator.
fn metadata_info(kind: EngineOpKind, op: &PhysicalOp) -> Result<EngineMeta, PlanError> {
    let key = op.key;
    let get = |field: &str| op.meta.get(field).ok_or_else(|| malformed(key, field));
    Ok(match kind {
        EngineOpKind::ReadTable => {
            let MetaValue::Fields(columns) = get("columns")? else {
                return Err(malformed(key, "columns"));
            };
            let sort_key = match op.meta.get("sort_key") {
                None => None,
                Some(MetaValue::Text(s)) => Some(s.clone()),
                Some(_) => return Err(malformed(key, "sort_key")),
            };
            EngineMeta::ReadTable {
                table: text(op, "table")?,
                columns: columns.clone(),
                sort_key,
            }
        }
        EngineOpKind::Filters => match get("predicates")? {
            MetaValue::Predicates(p) => EngineMeta::Filters {
                predicates: p.clone(),
            },
            _ => return Err(malformed(key, "predicates")),
        },
        EngineOpKind::SelectColumns => match get("exprs")? {
            MetaValue::Exprs(e) => EngineMeta::SelectColumns { exprs: e.clone() },
            _ => return Err(malformed(key, "exprs")),
        },
        EngineOpKind::MergeJoin => {
            let strategy = text(op, "strategy")?;
            let indexed = match (strategy.as_str(), op.meta.get("indexed_side")) {
                ("hash", None) => None,
                ("indexed", Some(MetaValue::Text(s))) if s == "left" => Some(JoinSide::Left),
                ("indexed", Some(MetaValue::Text(s))) if s == "right" => Some(JoinSide::Right),
                ("hash" | "indexed", _) => return Err(malformed(key, "indexed_side")),
                _ => return Err(malformed(key, "strategy")),
            };
            EngineMeta::MergeJoin {
                left_key: text(op, "left_key")?,
                right_key: text(op, "right_key")?,
                indexed,
            }
        }
        EngineOpKind::GroupbyAgg => {
            let MetaValue::Texts(group_by) = get("group_by")? else {
                return Err(malformed(key, "group_by"));
            };
            let MetaValue::Outputs(output) = get("aggregates")? else {
                return Err(malformed(key, "aggregates"));
            };
            EngineMeta::GroupbyAgg {
                group_by: group_by.clone(),
                output: output.clone(),
            }
        }
        EngineOpKind::SortValues => match get("keys")? {
            MetaValue::SortKeys(k) => EngineMeta::SortValues { keys: k.clone() },
            _ => return Err(malformed(key, "keys")),
        },
        EngineOpKind::Head => {
            let n = match get("n")? {
                MetaValue::Int(n) if *n >= 0 => *n as u64,
                _ => return Err(malformed(key, "n")),
            };
            let canonical = match op.meta.get("canonical") {
                None => false,
                Some(MetaValue::Bool(b)) => *b,
                Some(_) => return Err(malformed(key, "canonical")),
            };
            EngineMeta::Head { n, canonical }
        }
        EngineOpKind::ApplyUdf => match get("udf")? {
            MetaValue::Udf(u) => EngineMeta::ApplyUdf { udf: (**u).clone() },
            _ => return Err(malformed(key, "udf")),
        },
    })
}

impl EngineOperator {
    /// Output relation of this operator given its resolved inputs.
    pub fn output_info(&self) -> TableInfo {
        let relation = match &self.meta {
            EngineMeta::ReadTable { table, .. } => table.clone(),
            _ => format!("r{}", self.key),
        };
        let first = self.inputs.first();
        let (columns, sorted_on, base_table) = match &self.meta {
            EngineMeta::ReadTable {
                table,
                columns,
                sort_key,
            } => (columns.clone(), sort_key.clone(), Some(table.clone())),
            EngineMeta::Filters { .. } | EngineMeta::Head { .. } => {
                let i = first.unwrap();
                let keeps = matches!(self.meta, EngineMeta::Filters { .. });
                (
                    i.columns.clone(),
                    if keeps { i.sorted_on.clone() } else { None },
                    if keeps { i.base_table.clone() } else { None },
                )
            }
            EngineMeta::SelectColumns { exprs } => {
                let i = first.unwrap();
                let columns = exprs
                    .iter()
                    .map(|(n, e)| Field::new(n.clone(), e.data_type()))
                    .collect();
                let kept = i.sorted_on.as_ref().filter(|s| {
                    exprs
                        .iter()
                        .any(|(n, e)| n == *s && matches!(e, BoundExpr::Column(c) if &c.name == *s))
                });
                (columns, kept.cloned(), kept.and(i.base_table.clone()))
            }
            EngineMeta::MergeJoin { .. } => {
                let mut c = self.inputs[0].columns.clone();
                c.extend(self.inputs[1].columns.iter().cloned());
                (c, None, None)
            }
            EngineMeta::GroupbyAgg { output, .. } => (
                output
                    .iter()
                    .map(|o| Field::new(o.name(), o.data_type()))
                    .collect(),
                None,
                None,
            ),
            EngineMeta::SortValues { .. } => (first.unwrap().columns.clone(), None, None),
            EngineMeta::ApplyUdf { .. } => (Vec::new(), None, None),
        };
        TableInfo {
            relation,
            columns,
            sorted_on,
            base_table,
        }
    }

    pub fn label(&self) -> String {
        match &self.meta {
            EngineMeta::ReadTable { table, .. } => format!("read_table({table})"),
            EngineMeta::Filters { predicates } => format!(
                "filters({})",
                predicates
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(" AND ")
            ),
            EngineMeta::SelectColumns { exprs } => format!(
                "select_columns({})",
                exprs
                    .iter()
                    .map(|(n, e)| match e {
                        BoundExpr::Column(c) if &c.name == n => n.clone(),
                        _ => format!("{e} AS {n}"),
                    })
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            EngineMeta::MergeJoin {
                left_key,
                right_key,
                indexed,
            } => format!(
                "merge_join({left_key} = {right_key}, {})",
                if indexed.is_some() { "indexed" } else { "hash" }
            ),
            EngineMeta::GroupbyAgg { group_by, output } => {
                let aggs: Vec<String> = output
                    .iter()
                    .filter_map(|o| match o {
                        OutputItem::Agg { func, arg, name } => Some(match arg {
                            Some(a) => format!("{}({a}) AS {name}", func.name()),
                            None => format!("{}(*) AS {name}", func.name()),
                        }),
                        _ => None,
                    })
                    .collect();
                let mut parts = vec![format!("by [{}]", group_by.join(", "))];
                parts.extend(aggs);
                format!("groupby_agg({})", parts.join(", "))
            }
            EngineMeta::SortValues { keys } => format!(
                "sort_values({})",
                keys.iter()
                    .map(|(k, d)| if *d { format!("{k} DESC") } else { k.clone() })
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            EngineMeta::Head { n, .. } => format!("head({n})"),
            EngineMeta::ApplyUdf { udf } => format!("apply_udf({}({}))", udf.name, udf.arg_names.join(", ")),
        }
    }
}

/// Two passes: first every operator is converted with its typed metadata,
/// then each operator's inputs are resolved against the outputs of the
/// operators it depends on.
pub fn convert_to_engine_plan(plan: &PhysicalPlan) -> Result<EnginePlan, PlanError> {
    let mut ops: Vec<EngineOperator> = Vec::with_capacity(plan.op_count());
    let mut seen = BTreeSet::new();
    for group in &plan.groups {
        for op in &group.ops {
            let kind = EngineOpKind::convert(&op.op_type).ok_or_else(|| {
                PlanError::UnknownOperatorType {
                    key: op.key,
                    op_type: op.op_type.clone(),
                }
            })?;
            if !seen.insert(op.key) {
                return Err(PlanError::DuplicateKey(op.key));
            }
            if op.children.len() != kind.arity() {
                return Err(malformed(op.key, "children"));
            }
            ops.push(EngineOperator {
                key: op.key,
                kind,
                meta: metadata_info(kind, op)?,
                children: op.children.clone(),
                inputs: Vec::new(),
            });
        }
    }

    let mut outputs: BTreeMap<u32, TableInfo> = BTreeMap::new();
    let mut name_env = BTreeMap::new();
    for op in &mut ops {
        op.inputs = op
            .children
            .iter()
            .map(|c| {
                outputs.get(c).cloned().ok_or(PlanError::DanglingChild {
                    key: op.key,
                    child: *c,
                })
            })
            .collect::<Result<_, _>>()?;
        let info = op.output_info();
        name_env.insert(info.relation.clone(), info.columns.clone());
        outputs.insert(op.key, info);
    }
    Ok(EnginePlan { ops, name_env })
}

impl EnginePlan {
    pub fn get(&self, key: u32) -> Option<&EngineOperator> {
        self.ops.iter().find(|o| o.key == key)
    }

    /// Operators nobody consumes; a query plan has exactly one.
    pub fn roots(&self) -> Vec<u32> {
        let consumed: BTreeSet<u32> = self.ops.iter().flat_map(|o| o.children.iter().copied()).collect();
        self.ops
            .iter()
            .map(|o| o.key)
            .filter(|k| !consumed.contains(k))
            .collect()
    }

    /// Structured dump, one operator per line in execution order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for op in &self.ops {
            let inputs: Vec<&str> = op.inputs.iter().map(|i| i.relation.as_str()).collect();
            let cols: Vec<String> = op
                .output_info()
                .columns
                .iter()
                .map(|f| format!("{}:{}", f.name, f.data_type))
                .collect();
            let _ = writeln!(
                out,
                "{} {} <- [{}] -> [{}]",
                op.key,
                op.label(),
                inputs.join(", "),
                cols.join(", ")
            );
        }
        out
    }
}

/// Indented operator tree, root first, two spaces per level.
pub fn render_explain(plan: &EnginePlan) -> String {
    if plan.ops.is_empty() {
        return "(empty plan)\n".to_string();
    }
    let by_key: BTreeMap<u32, &EngineOperator> = plan.ops.iter().map(|o| (o.key, o)).collect();
    let mut out = String::new();
    fn walk(key: u32, depth: usize, by_key: &BTreeMap<u32, &EngineOperator>, out: &mut String) {
        let op = by_key[&key];
        let _ = writeln!(out, "{}{}", "  ".repeat(depth), op.label());
        for c in &op.children {
            walk(*c, depth + 1, by_key, out);
        }
    }
    for root in plan.roots() {
        walk(root, 0, &by_key, &mut out);
    }
    out
}
