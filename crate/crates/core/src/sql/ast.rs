use std::collections::BTreeSet;
use std::fmt;

use crate::agg::AggFunction;
use crate::value::format_date;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator with its operands swapped: `a < b` iff `b > a`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// `DATE 'YYYY-MM-DD'`, as days since the epoch.
    Date(i32),
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// Aggregate call; `arg` is `None` for `count(*)`.
    Agg {
        func: AggFunction,
        arg: Option<Box<Expr>>,
    },
    /// Any other function call: a UDF.
    Call { name: String, args: Vec<Expr> },
}

impl Expr {
    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            Expr::Int(_) | Expr::Float(_) | Expr::Str(_) | Expr::Date(_)
        )
    }

    pub fn contains_agg(&self) -> bool {
        match self {
            Expr::Agg { .. } => true,
            Expr::Binary { left, right, .. } => left.contains_agg() || right.contains_agg(),
            Expr::Call { args, .. } => args.iter().any(Expr::contains_agg),
            _ => false,
        }
    }

    pub fn contains_call(&self) -> bool {
        match self {
            Expr::Call { .. } => true,
            Expr::Binary { left, right, .. } => left.contains_call() || right.contains_call(),
            Expr::Agg { arg, .. } => arg.as_deref().is_some_and(Expr::contains_call),
            _ => false,
        }
    }

    /// Column names referenced anywhere in the expression.
    pub fn columns(&self, out: &mut Vec<String>) {
        match self {
            Expr::Column(c) => out.push(c.clone()),
            Expr::Binary { left, right, .. } => {
                left.columns(out);
                right.columns(out);
            }
            Expr::Agg { arg: Some(a), .. } => a.columns(out),
            Expr::Call { args, .. } => args.iter().for_each(|a| a.columns(out)),
            _ => {}
        }
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => f.write_str(c),
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Float(v) => write!(f, "{v:?}"),
            Expr::Str(s) => f.write_str(&quote(s)),
            Expr::Date(d) => write!(f, "DATE '{}'", format_date(*d)),
            Expr::Binary { op, left, right } => write!(f, "({left} {} {right})", op.symbol()),
            Expr::Agg { func, arg: None } => write!(f, "{func}(*)"),
            Expr::Agg { func, arg: Some(a) } => write!(f, "{func}({a})"),
            Expr::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl SelectItem {
    /// Output column name: the alias, else the expression text.
    pub fn output_name(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub left: Expr,
    pub op: CmpOp,
    pub right: Expr,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

/// A parsed single-block SELECT. `predicates` is the WHERE conjunction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedQuery {
    pub select: Vec<SelectItem>,
    pub from: Vec<String>,
    pub predicates: Vec<Predicate>,
    pub group_by: Vec<String>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

impl ParsedQuery {
    pub fn aliases(&self) -> BTreeSet<String> {
        self.select.iter().filter_map(|s| s.alias.clone()).collect()
    }

    pub fn is_aggregate(&self) -> bool {
        !self.group_by.is_empty() || self.select.iter().any(|s| s.expr.contains_agg())
    }
}

/// Canonical text; parsing it yields an equal [`ParsedQuery`].
impl fmt::Display for ParsedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, s) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", s.expr)?;
            if let Some(a) = &s.alias {
                write!(f, " AS {a}")?;
            }
        }
        write!(f, " FROM {}", self.from.join(", "))?;
        for (i, p) in self.predicates.iter().enumerate() {
            f.write_str(if i == 0 { " WHERE " } else { " AND " })?;
            write!(f, "{p}")?;
        }
        if !self.group_by.is_empty() {
            write!(f, " GROUP BY {}", self.group_by.join(", "))?;
        }
        for (i, o) in self.order_by.iter().enumerate() {
            f.write_str(if i == 0 { " ORDER BY " } else { ", " })?;
            write!(f, "{}{}", o.expr, if o.desc { " DESC" } else { "" })?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

/// Names a query references, as written.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryMetadata {
    pub table_names: BTreeSet<String>,
    pub column_names: BTreeSet<String>,
    pub udf_names: BTreeSet<String>,
}

impl QueryMetadata {
    pub fn of(q: &ParsedQuery) -> QueryMetadata {
        let aliases = q.aliases();
        let mut cols = Vec::new();
        let mut udfs = BTreeSet::new();
        let mut visit = |e: &Expr| {
            e.columns(&mut cols);
            collect_calls(e, &mut udfs);
        };
        q.select.iter().for_each(|s| visit(&s.expr));
        for p in &q.predicates {
            visit(&p.left);
            visit(&p.right);
        }
        let mut order_cols = Vec::new();
        for o in &q.order_by {
            collect_calls(&o.expr, &mut udfs);
            o.expr.columns(&mut order_cols);
        }
        cols.extend(q.group_by.iter().cloned());
        // A bare ORDER BY name matching an alias refers to the output column.
        cols.extend(order_cols.into_iter().filter(|c| !aliases.contains(c)));
        QueryMetadata {
            table_names: q.from.iter().cloned().collect(),
            column_names: cols.into_iter().collect(),
            udf_names: udfs,
        }
    }
}

fn collect_calls(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Call { name, args } => {
            out.insert(name.clone());
            args.iter().for_each(|a| collect_calls(a, out));
        }
        Expr::Binary { left, right, .. } => {
            collect_calls(left, out);
            collect_calls(right, out);
        }
        Expr::Agg { arg: Some(a), .. } => collect_calls(a, out),
        _ => {}
    }
}
