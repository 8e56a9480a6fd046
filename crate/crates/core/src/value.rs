//! Scalar values, column types and row helpers shared by every layer.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};

/// Column type. Ordered from narrowest to widest where widening applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataType {
    Int64,
    Float64,
    Date,
    Str,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::Int64 => "int64",
            DataType::Float64 => "float64",
            DataType::Date => "date",
            DataType::Str => "string",
        }
    }

    pub fn parse(name: &str) -> Option<DataType> {
        match name.to_ascii_lowercase().as_str() {
            "int64" | "int" | "integer" | "bigint" => Some(DataType::Int64),
            "float64" | "float" | "double" | "decimal" => Some(DataType::Float64),
            "date" => Some(DataType::Date),
            "string" | "str" | "text" | "varchar" | "char" => Some(DataType::Str),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, DataType::Int64 | DataType::Float64)
    }

    /// Least upper bound under the widening lattice
    /// `int64 < float64 < string`, `date < string`.
    pub fn widen(self, other: DataType) -> DataType {
        use DataType::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Int64, Float64) | (Float64, Int64) => Float64,
            _ => Str,
        }
    }

    /// Narrowest type that can represent `field`.
    pub fn sniff(field: &str) -> DataType {
        if field.parse::<i64>().is_ok() {
            DataType::Int64
        } else if looks_like_float(field) {
            DataType::Float64
        } else if parse_date(field).is_some() {
            DataType::Date
        } else {
            DataType::Str
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn looks_like_float(field: &str) -> bool {
    // Reject "inf"/"nan" spellings so free text never sniffs as numeric.
    field.bytes().any(|b| b.is_ascii_digit())
        && field
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
        && field.parse::<f64>().is_ok()
}

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => panic!("epoch"),
};

/// Parses a strict `YYYY-MM-DD` literal into days since 1970-01-01.
pub fn parse_date(text: &str) -> Option<i32> {
    let b = text.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    if !b
        .iter()
        .enumerate()
        .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
    {
        return None;
    }
    let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()?;
    Some((date - EPOCH).num_days() as i32)
}

pub fn format_date(days: i32) -> String {
    let date = EPOCH + chrono::Duration::days(days as i64);
    format!("{:04}-{:02}-{:02}", date.year(), date.month(), date.day())
}

/// A single cell.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    /// Days since 1970-01-01.
    Date(i32),
    Str(Arc<str>),
}

pub type Row = Vec<Value>;

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }

    pub fn data_type(&self) -> DataType {
        match self {
            Value::Int(_) => DataType::Int64,
            Value::Float(_) => DataType::Float64,
            Value::Date(_) => DataType::Date,
            Value::Str(_) => DataType::Str,
        }
    }

    pub fn parse_as(field: &str, ty: DataType) -> Option<Value> {
        if field.is_empty() {
            return None;
        }
        match ty {
            DataType::Int64 => field.parse().ok().map(Value::Int),
            DataType::Float64 => field.parse().ok().map(Value::Float),
            DataType::Date => parse_date(field).map(Value::Date),
            DataType::Str => Some(Value::str(field)),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// Integer view used for index keys; dates map to epoch days.
    pub fn as_key(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Date(d) => Some(*d as i64),
            _ => None,
        }
    }

    /// Rough in-memory footprint, used for transfer accounting.
    pub fn approx_bytes(&self) -> usize {
        match self {
            Value::Str(s) => 8 + s.len(),
            _ => 8,
        }
    }

    /// Total order used for sorting. Numerics compare by value across
    /// int/float; otherwise values order by type tag first.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Int(a), Value::Float(b)) => (*a as f64).total_cmp(b),
            (Value::Float(a), Value::Int(b)) => a.total_cmp(&(*b as f64)),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }

    /// SQL comparison; `None` when the operands are not comparable.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_))
            | (Value::Date(_), Value::Date(_))
            | (Value::Str(_), Value::Str(_)) => Some(self.total_cmp(other)),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) | Value::Float(_) => 0,
            Value::Date(_) => 1,
            Value::Str(_) => 2,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Date(a), Value::Date(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Int(v) => v.hash(state),
            Value::Float(v) => v.to_bits().hash(state),
            Value::Date(v) => v.hash(state),
            Value::Str(v) => v.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Date(d) => f.write_str(&format_date(*d)),
            Value::Str(s) => f.write_str(s),
        }
    }
}

pub fn row_bytes(row: &[Value]) -> usize {
    row.iter().map(Value::approx_bytes).sum()
}

/// Lexicographic row order under [`Value::total_cmp`].
pub fn cmp_rows(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}
