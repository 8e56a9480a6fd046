//! Raw-file tables: registration, schema inference, partitioned loading and
//! the persistence cache.

mod catalog;
mod format;
mod persist;
mod relation;

use std::path::PathBuf;

use thiserror::Error;

use crate::value::DataType;

pub use catalog::{Catalog, CatalogConfig, SharedStore, TableConfig, TableHandle, TableOptions};
pub use format::{infer_layout, infer_schema, read_rows, FileLayout, Format, INFER_SAMPLE_ROWS};
pub use persist::{PersistCache, PersistKey};
pub use relation::{Field, Partition, PartitionedRelation, Schema};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StorageError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),
    #[error("table `{0}` already registered")]
    DuplicateTable(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("file has no data rows: {}", .0.display())]
    EmptyFile(PathBuf),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: cannot parse `{value}` as {data_type} for column `{column}`")]
    ParseError {
        row: usize,
        column: String,
        value: String,
        data_type: DataType,
    },
    #[error("persist key `{0}` already bound to different content")]
    KeyConflict(String),
    #[error("partition size must be at least 1")]
    InvalidPartitionSize,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid relation: {0}")]
    InvalidRelation(String),
    #[error("catalog config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}
