//! Name resolution and type checking against the catalog and UDF registry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::ast::{BinOp, CmpOp, Expr, ParsedQuery};
use super::SqlError;
use crate::agg::AggFunction;
use crate::storage::{Catalog, Schema, StorageError};
use crate::udf::UdfRegistry;
use crate::value::{parse_date, DataType, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub name: String,
    /// Index into [`BoundQuery::tables`].
    pub table: usize,
    pub data_type: DataType,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundExpr {
    Column(ColumnRef),
    Literal(Value),
    Binary {
        op: BinOp,
        left: Box<BoundExpr>,
        right: Box<BoundExpr>,
        data_type: DataType,
    },
}

impl BoundExpr {
    pub fn data_type(&self) -> DataType {
        match self {
            BoundExpr::Column(c) => c.data_type,
            BoundExpr::Literal(v) => v.data_type(),
            BoundExpr::Binary { data_type, .. } => *data_type,
        }
    }

    pub fn columns(&self, out: &mut Vec<String>) {
        match self {
            BoundExpr::Column(c) => out.push(c.name.clone()),
            BoundExpr::Literal(_) => {}
            BoundExpr::Binary { left, right, .. } => {
                left.columns(out);
                right.columns(out);
            }
        }
    }

    pub fn tables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_tables(&mut out);
        out
    }

    fn collect_tables(&self, out: &mut BTreeSet<usize>) {
        match self {
            BoundExpr::Column(c) => {
                out.insert(c.table);
            }
            BoundExpr::Literal(_) => {}
            BoundExpr::Binary { left, right, .. } => {
                left.collect_tables(out);
                right.collect_tables(out);
            }
        }
    }
}

/// Literals print as values (dates bare, strings quoted).
impl fmt::Display for BoundExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundExpr::Column(c) => f.write_str(&c.name),
            BoundExpr::Literal(Value::Str(s)) => write!(f, "'{}'", s.replace('\'', "''")),
            BoundExpr::Literal(Value::Float(v)) => write!(f, "{v:?}"),
            BoundExpr::Literal(v) => write!(f, "{v}"),
            BoundExpr::Binary { op, left, right, .. } => {
                write!(f, "({left} {} {right})", op.symbol())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPredicate {
    pub left: BoundExpr,
    pub op: CmpOp,
    pub right: BoundExpr,
}

impl BoundPredicate {
    pub fn tables(&self) -> BTreeSet<usize> {
        let mut t = self.left.tables();
        t.extend(self.right.tables());
        t
    }

    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.left.columns(&mut out);
        self.right.columns(&mut out);
        out
    }

    /// `a = b` over same-typed columns of two different tables.
    pub fn equi_join(&self) -> Option<(&ColumnRef, &ColumnRef)> {
        match (&self.left, self.op, &self.right) {
            (BoundExpr::Column(a), CmpOp::Eq, BoundExpr::Column(b))
                if a.table != b.table && a.data_type == b.data_type =>
            {
                Some((a, b))
            }
            _ => None,
        }
    }
}

impl fmt::Display for BoundPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputItem {
    /// Row expression of a non-aggregate query.
    Scalar { expr: BoundExpr, name: String },
    /// Grouping column of an aggregate query.
    Group { column: ColumnRef, name: String },
    Agg {
        func: AggFunction,
        arg: Option<BoundExpr>,
        name: String,
    },
}

impl OutputItem {
    pub fn name(&self) -> &str {
        match self {
            OutputItem::Scalar { name, .. }
            | OutputItem::Group { name, .. }
            | OutputItem::Agg { name, .. } => name,
        }
    }

    pub fn data_type(&self) -> DataType {
        match self {
            OutputItem::Scalar { expr, .. } => expr.data_type(),
            OutputItem::Group { column, .. } => column.data_type,
            OutputItem::Agg { func, .. } => agg_output_type(*func),
        }
    }
}

/// `count` yields integers; every other aggregate yields floats.
pub fn agg_output_type(func: AggFunction) -> DataType {
    if func == AggFunction::Count {
        DataType::Int64
    } else {
        DataType::Float64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundUdf {
    /// Registered name.
    pub name: String,
    pub args: Vec<BoundExpr>,
    /// Frame column names, one per argument.
    pub arg_names: Vec<String>,
    pub arg_column_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    pub name: String,
    pub schema: Arc<Schema>,
    pub sort_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub parsed: ParsedQuery,
    pub tables: Vec<BoundTable>,
    pub predicates: Vec<BoundPredicate>,
    pub group_by: Vec<ColumnRef>,
    /// Empty for UDF queries.
    pub output: Vec<OutputItem>,
    /// `(output column, descending)`.
    pub order_by: Vec<(usize, bool)>,
    pub limit: Option<u64>,
    pub udf: Option<BoundUdf>,
    pub udf_signatures: BTreeMap<String, Vec<usize>>,
}

impl BoundQuery {
    pub fn is_aggregate(&self) -> bool {
        self.output
            .iter()
            .any(|o| !matches!(o, OutputItem::Scalar { .. }))
    }

    pub fn output_names(&self) -> Vec<String> {
        self.output.iter().map(|o| o.name().to_string()).collect()
    }

    pub fn output_types(&self) -> Vec<DataType> {
        self.output.iter().map(OutputItem::data_type).collect()
    }

    /// Columns of table `t` the query needs, in schema order.
    pub fn needed_columns(&self, t: usize) -> Vec<String> {
        let mut names = Vec::new();
        for p in &self.predicates {
            names.extend(p.columns());
        }
        for g in &self.group_by {
            names.push(g.name.clone());
        }
        for o in &self.output {
            match o {
                OutputItem::Scalar { expr, .. } => expr.columns(&mut names),
                OutputItem::Group { column, .. } => names.push(column.name.clone()),
                OutputItem::Agg { arg: Some(a), .. } => a.columns(&mut names),
                OutputItem::Agg { arg: None, .. } => {}
            }
        }
        if let Some(u) = &self.udf {
            u.args.iter().for_each(|a| a.columns(&mut names));
        }
        let wanted: BTreeSet<String> = names.into_iter().collect();
        self.tables[t]
            .schema
            .names()
            .into_iter()
            .filter(|n| wanted.contains(n))
            .collect()
    }
}

struct Binder<'a> {
    tables: Vec<BoundTable>,
    udfs: &'a UdfRegistry,
}

impl Binder<'_> {
    fn column(&self, name: &str) -> Result<ColumnRef, SqlError> {
        let hits: Vec<(usize, DataType)> = self
            .tables
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.schema.field(name).map(|f| (i, f.data_type)))
            .collect();
        match hits.as_slice() {
            [] => Err(SqlError::UnknownColumn(name.to_string())),
            [(table, ty)] => Ok(ColumnRef {
                name: name.to_string(),
                table: *table,
                data_type: *ty,
            }),
            _ => Err(SqlError::AmbiguousColumn {
                column: name.to_string(),
                tables: hits.iter().map(|(i, _)| self.tables[*i].name.clone()).collect(),
            }),
        }
    }

    /// Binds a row-level expression: no aggregates, no calls.
    fn scalar(&self, e: &Expr, context: &str) -> Result<BoundExpr, SqlError> {
        Ok(match e {
            Expr::Column(c) => BoundExpr::Column(self.column(c)?),
            Expr::Int(v) => BoundExpr::Literal(Value::Int(*v)),
            Expr::Float(v) => BoundExpr::Literal(Value::Float(*v)),
            Expr::Str(s) => BoundExpr::Literal(Value::str(s)),
            Expr::Date(d) => BoundExpr::Literal(Value::Date(*d)),
            Expr::Binary { op, left, right } => {
                let l = self.scalar(left, context)?;
                let r = self.scalar(right, context)?;
                if !l.data_type().is_numeric() || !r.data_type().is_numeric() {
                    return Err(SqlError::TypeMismatch(format!(
                        "arithmetic needs numeric operands in `{e}`"
                    )));
                }
                let data_type = if *op == BinOp::Div
                    || l.data_type() == DataType::Float64
                    || r.data_type() == DataType::Float64
                {
                    DataType::Float64
                } else {
                    DataType::Int64
                };
                BoundExpr::Binary {
                    op: *op,
                    left: Box::new(l),
                    right: Box::new(r),
                    data_type,
                }
            }
            Expr::Agg { .. } => {
                return Err(SqlError::Unsupported(format!("aggregate `{e}` in {context}")))
            }
            Expr::Call { name, .. } => {
                if !self.udfs.contains(name) {
                    return Err(SqlError::UnknownUdf(name.clone()));
                }
                return Err(SqlError::Unsupported(format!(
                    "UDF `{name}` is only allowed as the sole select item"
                )));
            }
        })
    }

    fn predicate(&self, left: &Expr, op: CmpOp, right: &Expr) -> Result<BoundPredicate, SqlError> {
        let mut l = self.scalar(left, "WHERE")?;
        let mut r = self.scalar(right, "WHERE")?;
        coerce_date(&mut l, &r)?;
        coerce_date(&mut r, &l)?;
        let (lt, rt) = (l.data_type(), r.data_type());
        if !(lt == rt || lt.is_numeric() && rt.is_numeric()) {
            return Err(SqlError::TypeMismatch(format!(
                "cannot compare {lt} with {rt} in `{left} {} {right}`",
                op.symbol()
            )));
        }
        Ok(BoundPredicate { left: l, op, right: r })
    }
}

/// A string literal compared with a date becomes a date literal.
fn coerce_date(side: &mut BoundExpr, other: &BoundExpr) -> Result<(), SqlError> {
    if other.data_type() != DataType::Date {
        return Ok(());
    }
    if let BoundExpr::Literal(Value::Str(s)) = side {
        let d = parse_date(s)
            .ok_or_else(|| SqlError::TypeMismatch(format!("'{s}' is not a date")))?;
        *side = BoundExpr::Literal(Value::Date(d));
    }
    Ok(())
}

fn storage_err(e: StorageError) -> SqlError {
    match e {
        StorageError::UnknownTable(t) => SqlError::UnknownTable(t),
        other => SqlError::Storage(other.to_string()),
    }
}

/// Resolves every name of `parsed` and checks the query shape.
pub fn bind(parsed: ParsedQuery, catalog: &Catalog, udfs: &UdfRegistry) -> Result<BoundQuery, SqlError> {
    let mut tables = Vec::new();
    for name in &parsed.from {
        if tables.iter().any(|t: &BoundTable| &t.name == name) {
            return Err(SqlError::Unsupported(format!("table `{name}` listed twice")));
        }
        let handle = catalog.table(name).map_err(storage_err)?;
        tables.push(BoundTable {
            name: name.clone(),
            schema: handle.schema.clone(),
            sort_key: handle.sort_key.clone(),
        });
    }
    let b = Binder { tables, udfs };

    let predicates = parsed
        .predicates
        .iter()
        .map(|p| b.predicate(&p.left, p.op, &p.right))
        .collect::<Result<Vec<_>, _>>()?;
    check_connected(&b.tables, &predicates)?;

    let group_by = parsed
        .group_by
        .iter()
        .map(|g| b.column(g))
        .collect::<Result<Vec<_>, _>>()?;

    let udf_items = parsed
        .select
        .iter()
        .filter(|s| s.expr.contains_call())
        .count();
    let mut udf_signatures = BTreeMap::new();
    if udf_items > 0 {
        let udf = bind_udf(&b, &parsed)?;
        udf_signatures.insert(udf.name.clone(), udf.arg_column_counts.clone());
        return Ok(BoundQuery {
            limit: parsed.limit,
            tables: b.tables,
            predicates,
            group_by,
            output: Vec::new(),
            order_by: Vec::new(),
            udf: Some(udf),
            udf_signatures,
            parsed,
        });
    }

    let aggregate = parsed.is_aggregate();
    let mut output = Vec::new();
    for item in &parsed.select {
        let name = item.output_name();
        let bound = match &item.expr {
            Expr::Agg { func, arg } => {
                let arg = match arg {
                    None => None,
                    Some(a) => {
                        let a = b.scalar(a, "an aggregate argument")?;
                        if *func != AggFunction::Count && !a.data_type().is_numeric() {
                            return Err(SqlError::TypeMismatch(format!(
                                "{func} needs a numeric argument, got {}",
                                a.data_type()
                            )));
                        }
                        Some(a)
                    }
                };
                OutputItem::Agg {
                    func: *func,
                    arg,
                    name,
                }
            }
            e if e.contains_agg() => {
                return Err(SqlError::Unsupported(format!(
                    "expressions over aggregates are not supported: `{e}`"
                )))
            }
            Expr::Column(c) if aggregate => {
                let column = b.column(c)?;
                if !group_by.contains(&column) {
                    return Err(SqlError::NotGrouped(c.clone()));
                }
                OutputItem::Group { column, name }
            }
            e if aggregate => {
                b.scalar(e, "the select list")?;
                return Err(SqlError::Unsupported(format!(
                    "select item `{e}` must be a grouping column or an aggregate"
                )));
            }
            e => OutputItem::Scalar {
                expr: b.scalar(e, "the select list")?,
                name,
            },
        };
        output.push(bound);
    }
    let mut seen = BTreeSet::new();
    for o in &output {
        if !seen.insert(o.name().to_string()) {
            return Err(SqlError::Unsupported(format!("duplicate output column `{}`", o.name())));
        }
    }

    let mut order_by = Vec::new();
    for o in &parsed.order_by {
        let idx = parsed
            .select
            .iter()
            .position(|s| matches!(&o.expr, Expr::Column(c) if s.alias.as_deref() == Some(c.as_str())))
            .or_else(|| parsed.select.iter().position(|s| s.expr == o.expr))
            .ok_or_else(|| {
                SqlError::Unsupported(format!("ORDER BY `{}` must name a select-list column", o.expr))
            })?;
        order_by.push((idx, o.desc));
    }

    Ok(BoundQuery {
        limit: parsed.limit,
        tables: b.tables,
        predicates,
        group_by,
        output,
        order_by,
        udf: None,
        udf_signatures,
        parsed,
    })
}

fn bind_udf(b: &Binder<'_>, parsed: &ParsedQuery) -> Result<BoundUdf, SqlError> {
    let [item] = parsed.select.as_slice() else {
        return Err(SqlError::Unsupported("a UDF must be the only select item".into()));
    };
    let Expr::Call { name, args } = &item.expr else {
        return Err(SqlError::Unsupported(format!(
            "UDF calls cannot be nested in `{}`",
            item.expr
        )));
    };
    let desc = b
        .udfs
        .get(name)
        .ok_or_else(|| SqlError::UnknownUdf(name.clone()))?;
    if args.len() != desc.total_columns() {
        return Err(SqlError::UdfArityMismatch {
            name: name.clone(),
            expected: desc.total_columns(),
            found: args.len(),
        });
    }
    if !parsed.group_by.is_empty() || !parsed.order_by.is_empty() {
        return Err(SqlError::Unsupported("UDF queries cannot GROUP BY or ORDER BY".into()));
    }
    let bound = args
        .iter()
        .map(|a| b.scalar(a, "a UDF argument"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut arg_names: Vec<String> = args.iter().map(|a| a.to_string()).collect();
    // Frame column names must be distinct.
    let mut seen = BTreeSet::new();
    for (i, n) in arg_names.iter_mut().enumerate() {
        if !seen.insert(n.clone()) {
            *n = format!("{n}_{}", i + 1);
            seen.insert(n.clone());
        }
    }
    Ok(BoundUdf {
        name: desc.name,
        args: bound,
        arg_names,
        arg_column_counts: desc.arg_column_counts,
    })
}

/// Every table must be reachable through equi-join predicates.
fn check_connected(tables: &[BoundTable], predicates: &[BoundPredicate]) -> Result<(), SqlError> {
    if tables.len() < 2 {
        return Ok(());
    }
    let mut reached = BTreeSet::from([0usize]);
    loop {
        let before = reached.len();
        for p in predicates {
            if let Some((a, c)) = p.equi_join() {
                if reached.contains(&a.table) || reached.contains(&c.table) {
                    reached.insert(a.table);
                    reached.insert(c.table);
                }
            }
        }
        if reached.len() == before {
            break;
        }
    }
    match (0..tables.len()).find(|t| !reached.contains(t)) {
        None => Ok(()),
        Some(t) => Err(SqlError::Unsupported(format!(
            "table `{}` is not joined by an equality predicate (cross joins are unsupported)",
            tables[t].name
        ))),
    }
}
