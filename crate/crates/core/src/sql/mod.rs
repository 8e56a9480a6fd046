//! SQL frontend: lexing, parsing, metadata extraction and binding.

mod ast;
mod bind;
mod eval;
mod lexer;
mod parser;
pub mod queries;

use thiserror::Error;

pub use ast::{BinOp, CmpOp, Expr, OrderItem, ParsedQuery, Predicate, QueryMetadata, SelectItem};
pub use bind::{
    agg_output_type, bind, BoundExpr, BoundPredicate, BoundQuery, BoundTable, BoundUdf, ColumnRef,
    OutputItem,
};
pub use eval::{arith, compare, RowPredicate, ScalarExpr};
pub use lexer::{is_keyword, KEYWORDS};
pub use parser::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqlError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` is ambiguous between {tables:?}")]
    AmbiguousColumn { column: String, tables: Vec<String> },
    #[error("unknown UDF `{0}`")]
    UnknownUdf(String),
    #[error("UDF `{name}` takes {expected} columns, called with {found}")]
    UdfArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("column `{0}` must appear in GROUP BY")]
    NotGrouped(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("catalog: {0}")]
    Storage(String),
}

/// Parses and binds in one step.
pub fn parse_and_bind(
    sql: &str,
    catalog: &crate::storage::Catalog,
    udfs: &crate::udf::UdfRegistry,
) -> Result<BoundQuery, SqlError> {
    let (parsed, _) = parse(sql)?;
    bind(parsed, catalog, udfs)
}
