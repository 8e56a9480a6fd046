//! Scalar semantics shared by the engine and the reference evaluator, plus
//! position-compiled expressions for the executor.

use std::cmp::Ordering;

use super::ast::{BinOp, CmpOp};
use super::bind::{BoundExpr, BoundPredicate};
use crate::value::Value;

/// Integer `+ - *` wrap; `/` always yields a float.
pub fn arith(op: BinOp, a: &Value, b: &Value) -> Value {
    if let (Value::Int(x), Value::Int(y), false) = (a, b, op == BinOp::Div) {
        return Value::Int(match op {
            BinOp::Add => x.wrapping_add(*y),
            BinOp::Sub => x.wrapping_sub(*y),
            _ => x.wrapping_mul(*y),
        });
    }
    let (x, y) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
    Value::Float(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => x / y,
    })
}

/// Incomparable values never satisfy a comparison.
pub fn compare(op: CmpOp, a: &Value, b: &Value) -> bool {
    let Some(ord) = a.sql_cmp(b) else {
        return false;
    };
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

/// A bound expression with column names replaced by row positions.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Col(usize),
    Lit(Value),
    Bin(BinOp, Box<ScalarExpr>, Box<ScalarExpr>),
}

impl ScalarExpr {
    /// Compiles against a row layout given as column names. `None` when a
    /// referenced column is absent from the layout.
    pub fn compile(e: &BoundExpr, layout: &[String]) -> Option<ScalarExpr> {
        Some(match e {
            BoundExpr::Column(c) => ScalarExpr::Col(layout.iter().position(|n| *n == c.name)?),
            BoundExpr::Literal(v) => ScalarExpr::Lit(v.clone()),
            BoundExpr::Binary { op, left, right, .. } => ScalarExpr::Bin(
                *op,
                Box::new(ScalarExpr::compile(left, layout)?),
                Box::new(ScalarExpr::compile(right, layout)?),
            ),
        })
    }

    pub fn eval(&self, row: &[Value]) -> Value {
        match self {
            ScalarExpr::Col(i) => row[*i].clone(),
            ScalarExpr::Lit(v) => v.clone(),
            ScalarExpr::Bin(op, l, r) => arith(*op, &l.eval(row), &r.eval(row)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowPredicate {
    pub left: ScalarExpr,
    pub op: CmpOp,
    pub right: ScalarExpr,
}

impl RowPredicate {
    pub fn compile(p: &BoundPredicate, layout: &[String]) -> Option<RowPredicate> {
        Some(RowPredicate {
            left: ScalarExpr::compile(&p.left, layout)?,
            op: p.op,
            right: ScalarExpr::compile(&p.right, layout)?,
        })
    }

    pub fn eval(&self, row: &[Value]) -> bool {
        compare(self.op, &self.left.eval(row), &self.right.eval(row))
    }
}
