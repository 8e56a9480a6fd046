use std::collections::HashSet;
use std::sync::Arc;

use crate::value::{cmp_rows, DataType, Row};

use super::StorageError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub data_type: DataType,
}

impl Field {
    pub fn new(name: impl Into<String>, data_type: DataType) -> Field {
        Field {
            name: name.into(),
            data_type,
        }
    }
}

/// Ordered, uniquely named columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Schema, StorageError> {
        let mut seen = HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(StorageError::InvalidSchema(format!(
                    "duplicate column `{}`",
                    f.name
                )));
            }
        }
        Ok(Schema { fields })
    }

    /// Schema of a registered table, which must have at least one column.
    pub fn for_table(fields: Vec<Field>) -> Result<Schema, StorageError> {
        if fields.is_empty() {
            return Err(StorageError::InvalidSchema("schema has no columns".into()));
        }
        Schema::new(fields)
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.fields.iter().map(|f| f.name.clone()).collect()
    }

    pub fn types(&self) -> Vec<DataType> {
        self.fields.iter().map(|f| f.data_type).collect()
    }
}

/// A contiguous chunk of a relation. Ordinals start at 1; 0 is reserved as
/// the "no partition" sentinel by the learned index.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub ordinal: u32,
    pub rows: Arc<Vec<Row>>,
}

impl Partition {
    pub fn new(ordinal: u32, rows: Vec<Row>) -> Partition {
        Partition {
            ordinal,
            rows: Arc::new(rows),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedRelation {
    pub schema: Arc<Schema>,
    pub partitions: Vec<Partition>,
    pub sorted_on: Option<String>,
}

impl PartitionedRelation {
    pub fn empty(schema: Arc<Schema>) -> PartitionedRelation {
        PartitionedRelation {
            schema,
            partitions: Vec::new(),
            sorted_on: None,
        }
    }

    /// Splits `rows` into chunks of at most `partition_size`, numbered 1..n.
    pub fn from_rows(schema: Arc<Schema>, rows: Vec<Row>, partition_size: usize) -> Self {
        assert!(partition_size >= 1, "partition size must be positive");
        let mut partitions = Vec::with_capacity(rows.len().div_ceil(partition_size));
        let mut rows = rows.into_iter().peekable();
        while rows.peek().is_some() {
            let chunk: Vec<Row> = rows.by_ref().take(partition_size).collect();
            partitions.push(Partition::new(partitions.len() as u32 + 1, chunk));
        }
        PartitionedRelation {
            schema,
            partitions,
            sorted_on: None,
        }
    }

    pub fn row_count(&self) -> usize {
        self.partitions.iter().map(Partition::len).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.partitions.iter().flat_map(|p| p.rows.iter())
    }

    pub fn to_rows(&self) -> Vec<Row> {
        self.rows().cloned().collect()
    }

    /// Rows in canonical (fully sorted) order, for order-insensitive
    /// comparisons.
    pub fn canonical_rows(&self) -> Vec<Row> {
        let mut rows = self.to_rows();
        rows.sort_by(|a, b| cmp_rows(a, b));
        rows
    }

    /// Checks the ordinal and (if set) sortedness invariants.
    pub fn validate(&self) -> Result<(), StorageError> {
        for (i, p) in self.partitions.iter().enumerate() {
            if p.ordinal != i as u32 + 1 {
                return Err(StorageError::InvalidRelation(format!(
                    "partition at position {i} has ordinal {}",
                    p.ordinal
                )));
            }
        }
        if let Some(col) = &self.sorted_on {
            let idx = self.schema.index_of(col).ok_or_else(|| {
                StorageError::InvalidRelation(format!("sorted_on column `{col}` not in schema"))
            })?;
            let mut prev = None;
            for row in self.rows() {
                if let Some(p) = prev {
                    if row[idx].total_cmp(p).is_lt() {
                        return Err(StorageError::InvalidRelation(format!(
                            "rows not sorted on `{col}`"
                        )));
                    }
                }
                prev = Some(&row[idx]);
            }
        }
        Ok(())
    }
}
