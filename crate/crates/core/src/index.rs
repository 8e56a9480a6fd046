//! Distributed learned index over a relation sorted on its join column.
//!
//! Each partition contributes one range `[begin, end] -> partition`. The
//! index function is the sum of per-partition step functions built from the
//! Heaviside function:
//!
//! ```text
//! H(x)        = 0 if x < 0, 1 if x >= 0
//! P_{a,b,c}(y) = H((b - y) * (y - a)) * c
//! L(y)        = sum over ranges of P_{a,b,c}(y)
//! ```
//!
//! Ranges are disjoint, so at most one term is non-zero and `L` can be
//! evaluated by binary search over the range starts. Partition 0 means the
//! key falls in no partition.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::ops::hash_join_rows;
use crate::storage::{Field, Partition, PartitionedRelation, Schema, StorageError};
use crate::value::{DataType, Row, Value};

/// Name of the column appended by [`annotate_partitions`].
pub const PARTITION_COLUMN: &str = "Partition";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("invalid range: begin {begin} > end {end}")]
    InvalidRange { begin: i64, end: i64 },
    #[error("relation is not sorted on `{0}`")]
    NotSorted(String),
    #[error("key {key} spans partitions {left} and {right}")]
    OverlappingPartitions { key: i64, left: u32, right: u32 },
    #[error("column `{0}` not found")]
    UnknownColumn(String),
    #[error("cannot index column of type {0}")]
    UnsupportedKeyType(DataType),
    #[error("type mismatch: index keys are {index}, column is {column}")]
    TypeMismatch { index: DataType, column: DataType },
    #[error("malformed index dump line {line}: {text}")]
    MalformedDump { line: usize, text: String },
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Heaviside step function.
pub fn heaviside(x: f64) -> u8 {
    if x < 0.0 {
        0
    } else {
        1
    }
}

/// Partition function: `c` when `a <= y <= b`, otherwise 0.
pub fn partition_fn(a: i64, b: i64, c: u32, y: i64) -> Result<u32, IndexError> {
    if a > b {
        return Err(IndexError::InvalidRange { begin: a, end: b });
    }
    // i128 keeps the product exact; the f64 conversion preserves its sign.
    let product = (b as i128 - y as i128) * (y as i128 - a as i128);
    Ok(heaviside(product as f64) as u32 * c)
}

/// One entry of the sparse index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionRange {
    pub begin: i64,
    pub end: i64,
    pub partition: u32,
}

impl PartitionRange {
    pub fn new(begin: i64, end: i64, partition: u32) -> Result<PartitionRange, IndexError> {
        if begin > end {
            return Err(IndexError::InvalidRange { begin, end });
        }
        Ok(PartitionRange {
            begin,
            end,
            partition,
        })
    }

    /// Where `key` lies relative to this range.
    fn locate(&self, key: i64) -> Ordering {
        if key < self.begin {
            Ordering::Less
        } else if key > self.end {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSource {
    pub table: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedIndex {
    ranges: Vec<PartitionRange>,
    source: IndexSource,
    key_type: DataType,
}

impl LearnedIndex {
    /// Builds an index from explicit ranges, checking they are ordered,
    /// disjoint and carry strictly increasing positive ordinals.
    pub fn from_ranges(
        ranges: Vec<PartitionRange>,
        source: IndexSource,
        key_type: DataType,
    ) -> Result<LearnedIndex, IndexError> {
        if !matches!(key_type, DataType::Int64 | DataType::Date) {
            return Err(IndexError::UnsupportedKeyType(key_type));
        }
        for r in &ranges {
            if r.begin > r.end {
                return Err(IndexError::InvalidRange {
                    begin: r.begin,
                    end: r.end,
                });
            }
        }
        for w in ranges.windows(2) {
            if w[1].begin < w[0].begin || w[1].partition <= w[0].partition {
                return Err(IndexError::NotSorted(source.column.clone()));
            }
            if w[0].end >= w[1].begin {
                return Err(IndexError::OverlappingPartitions {
                    key: w[1].begin,
                    left: w[0].partition,
                    right: w[1].partition,
                });
            }
        }
        if ranges.first().is_some_and(|r| r.partition == 0) {
            return Err(IndexError::InvalidRange { begin: 0, end: 0 });
        }
        Ok(LearnedIndex {
            ranges,
            source,
            key_type,
        })
    }

    pub fn ranges(&self) -> &[PartitionRange] {
        &self.ranges
    }

    pub fn source(&self) -> &IndexSource {
        &self.source
    }

    pub fn key_type(&self) -> DataType {
        self.key_type
    }

    pub fn with_table(mut self, table: &str) -> LearnedIndex {
        self.source.table = table.to_string();
        self
    }

    /// Partition holding `key`, or 0.
    pub fn probe(&self, key: i64) -> u32 {
        self.probe_counted(key).0
    }

    /// Like [`probe`](Self::probe), also returning the number of range
    /// comparisons performed (at most `floor(log2 n) + 1`).
    pub fn probe_counted(&self, key: i64) -> (u32, usize) {
        let (mut lo, mut hi) = (0, self.ranges.len());
        let mut comparisons = 0;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            comparisons += 1;
            match self.ranges[mid].locate(key) {
                Ordering::Equal => return (self.ranges[mid].partition, comparisons),
                Ordering::Less => hi = mid,
                Ordering::Greater => lo = mid + 1,
            }
        }
        (0, comparisons)
    }

    pub fn probe_value(&self, value: &Value) -> u32 {
        value.as_key().map_or(0, |k| self.probe(k))
    }

    /// One line per range: `begin end partition`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.ranges {
            let _ = writeln!(out, "{} {} {}", r.begin, r.end, r.partition);
        }
        out
    }

    pub fn parse_dump(
        text: &str,
        source: IndexSource,
        key_type: DataType,
    ) -> Result<LearnedIndex, IndexError> {
        let mut ranges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || IndexError::MalformedDump {
                line: i + 1,
                text: line.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [a, b, c] = parts.as_slice() else {
                return Err(bad());
            };
            ranges.push(PartitionRange::new(
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
                c.parse().map_err(|_| bad())?,
            )?);
        }
        LearnedIndex::from_ranges(ranges, source, key_type)
    }
}

fn key_column(schema: &Schema, column: &str) -> Result<(usize, DataType), IndexError> {
    let idx = schema
        .index_of(column)
        .ok_or_else(|| IndexError::UnknownColumn(column.to_string()))?;
    let ty = schema.fields()[idx].data_type;
    if !matches!(ty, DataType::Int64 | DataType::Date) {
        return Err(IndexError::UnsupportedKeyType(ty));
    }
    Ok((idx, ty))
}

/// Builds the sparse index of a relation sorted on `column`: one range per
/// non-empty partition spanning its first and last key.
pub fn build_index(rel: &PartitionedRelation, column: &str) -> Result<LearnedIndex, IndexError> {
    if rel.sorted_on.as_deref() != Some(column) {
        return Err(IndexError::NotSorted(column.to_string()));
    }
    let (idx, key_type) = key_column(&rel.schema, column)?;
    let mut ranges: Vec<PartitionRange> = Vec::with_capacity(rel.partitions.len());
    for p in &rel.partitions {
        let mut keys = p.rows.iter().map(|r| r[idx].as_key().expect("typed key"));
        let Some(first) = keys.next() else {
            continue;
        };
        let mut last = first;
        for k in keys {
            if k < last {
                return Err(IndexError::NotSorted(column.to_string()));
            }
            last = k;
        }
        if let Some(prev) = ranges.last() {
            if prev.end == first {
                return Err(IndexError::OverlappingPartitions {
                    key: first,
                    left: prev.partition,
                    right: p.ordinal,
                });
            }
            if prev.end > first {
                return Err(IndexError::NotSorted(column.to_string()));
            }
        }
        ranges.push(PartitionRange::new(first, last, p.ordinal)?);
    }
    LearnedIndex::from_ranges(
        ranges,
        IndexSource {
            table: String::new(),
            column: column.to_string(),
        },
        key_type,
    )
}

fn check_probe_column(
    idx: &LearnedIndex,
    schema: &Schema,
    column: &str,
) -> Result<usize, IndexError> {
    let pos = schema
        .index_of(column)
        .ok_or_else(|| IndexError::UnknownColumn(column.to_string()))?;
    let ty = schema.fields()[pos].data_type;
    if ty != idx.key_type() {
        return Err(IndexError::TypeMismatch {
            index: idx.key_type(),
            column: ty,
        });
    }
    Ok(pos)
}

/// Appends a `Partition` column holding `probe(row[column])` to every row of
/// `b`. Partitions are annotated independently in parallel.
pub fn annotate_partitions(
    idx: &LearnedIndex,
    b: &PartitionedRelation,
    column: &str,
) -> Result<PartitionedRelation, IndexError> {
    let pos = check_probe_column(idx, &b.schema, column)?;
    let mut fields = b.schema.fields().to_vec();
    fields.push(Field::new(PARTITION_COLUMN, DataType::Int64));
    let schema = Arc::new(Schema::new(fields)?);
    let partitions = b
        .partitions
        .par_iter()
        .map(|p| {
            let rows = p
                .rows
                .iter()
                .map(|r| {
                    let mut row = r.clone();
                    row.push(Value::Int(idx.probe_value(&r[pos]) as i64));
                    row
                })
                .collect();
            Partition::new(p.ordinal, rows)
        })
        .collect();
    Ok(PartitionedRelation {
        schema,
        partitions,
        sorted_on: b.sorted_on.clone(),
    })
}

/// Groups rows by the partition their key probes to. Rows probing to 0 are
/// dropped.
pub fn bucket_by_partition(idx: &LearnedIndex, rows: &[Row], pos: usize) -> BTreeMap<u32, Vec<Row>> {
    let mut buckets: BTreeMap<u32, Vec<Row>> = BTreeMap::new();
    for r in rows {
        let p = idx.probe_value(&r[pos]);
        if p != 0 {
            buckets.entry(p).or_default().push(r.clone());
        }
    }
    buckets
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedJoin {
    /// Rows are `A ++ B`, one output partition per touched A partition.
    pub relation: PartitionedRelation,
    /// Ordinals of the A partitions that were read.
    pub touched: Vec<u32>,
}

/// Equi-join of `a` (sorted on `col_a`) with `b`, reading only the
/// partitions of `a` that some key of `b` probes to.
pub fn indexed_join(
    a: &PartitionedRelation,
    b: &PartitionedRelation,
    col_a: &str,
    col_b: &str,
) -> Result<IndexedJoin, IndexError> {
    let idx = build_index(a, col_a)?;
    let a_pos = a.schema.index_of(col_a).expect("checked by build_index");
    let b_pos = check_probe_column(&idx, &b.schema, col_b)?;
    let annotated = annotate_partitions(&idx, b, col_b)?;
    let tag = annotated.schema.len() - 1;

    let mut selected: BTreeMap<u32, Vec<Row>> = BTreeMap::new();
    for row in annotated.rows() {
        let p = row[tag].as_key().expect("partition tag") as u32;
        if p != 0 {
            let mut r = row.clone();
            r.pop();
            selected.entry(p).or_default().push(r);
        }
    }

    let by_ordinal: BTreeMap<u32, &Partition> =
        a.partitions.iter().map(|p| (p.ordinal, p)).collect();
    let joined: Vec<(u32, Vec<Row>)> = selected
        .par_iter()
        .map(|(ordinal, b_rows)| {
            let a_part = by_ordinal[ordinal];
            (*ordinal, hash_join_rows(&a_part.rows, a_pos, b_rows, b_pos))
        })
        .collect();

    let mut fields = a.schema.fields().to_vec();
    fields.extend_from_slice(b.schema.fields());
    let schema = Arc::new(Schema::new(fields)?);
    let touched = joined.iter().map(|(o, _)| *o).collect();
    let partitions = joined
        .into_iter()
        .enumerate()
        .map(|(i, (_, rows))| Partition::new(i as u32 + 1, rows))
        .collect();
    Ok(IndexedJoin {
        relation: PartitionedRelation {
            schema,
            partitions,
            sorted_on: None,
        },
        touched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customer_index() -> LearnedIndex {
        let ranges = [(1, 200, 1), (250, 380, 2), (400, 560, 3), (580, 700, 4), (701, 800, 5)]
            .iter()
            .map(|&(a, b, c)| PartitionRange::new(a, b, c).unwrap())
            .collect();
        LearnedIndex::from_ranges(ranges, IndexSource::default(), DataType::Int64).unwrap()
    }

    fn keyed(parts: &[&[i64]], sorted: bool) -> PartitionedRelation {
        let schema = Arc::new(Schema::for_table(vec![Field::new("k", DataType::Int64)]).unwrap());
        PartitionedRelation {
            schema,
            partitions: parts
                .iter()
                .enumerate()
                .map(|(i, keys)| {
                    Partition::new(i as u32 + 1, keys.iter().map(|k| vec![Value::Int(*k)]).collect())
                })
                .collect(),
            sorted_on: sorted.then(|| "k".to_string()),
        }
    }

    #[test]
    fn heaviside_cases() {
        assert_eq!(heaviside(-3.0), 0);
        assert_eq!(heaviside(0.0), 1);
        assert_eq!(heaviside(7.0), 1);
    }

    #[test]
    fn partition_fn_cases() {
        assert_eq!(partition_fn(1, 200, 1, 150).unwrap(), 1);
        assert_eq!(partition_fn(1, 200, 1, 200).unwrap(), 1);
        assert_eq!(partition_fn(250, 380, 2, 240).unwrap(), 0);
        assert!(matches!(
            partition_fn(5, 1, 1, 3),
            Err(IndexError::InvalidRange { .. })
        ));
        // extreme keys must not overflow
        assert_eq!(partition_fn(i64::MIN, i64::MAX, 3, 0).unwrap(), 3);
        assert_eq!(partition_fn(0, 10, 3, i64::MAX).unwrap(), 0);
    }

    #[test]
    fn customer_probes() {
        let idx = customer_index();
        assert_eq!(idx.probe(150), 1);
        assert_eq!(idx.probe(560), 3);
        assert_eq!(idx.probe(390), 0);
        assert_eq!(idx.probe(801), 0);
        assert_eq!(idx.probe(0), 0);
    }

    #[test]
    fn single_partition_index() {
        let keys: Vec<i64> = (1..=10).collect();
        let idx = build_index(&keyed(&[&keys], true), "k").unwrap();
        assert_eq!(idx.ranges(), &[PartitionRange::new(1, 10, 1).unwrap()]);
    }

    #[test]
    fn boundary_duplicate_rejected() {
        let rel = keyed(&[&[98, 99, 100], &[100, 101]], true);
        assert!(matches!(
            build_index(&rel, "k"),
            Err(IndexError::OverlappingPartitions { key: 100, .. })
        ));
    }

    #[test]
    fn unsorted_rejected() {
        assert!(matches!(
            build_index(&keyed(&[&[1, 2]], false), "k"),
            Err(IndexError::NotSorted(_))
        ));
        assert!(matches!(
            build_index(&keyed(&[&[3, 2]], true), "k"),
            Err(IndexError::NotSorted(_))
        ));
    }

    #[test]
    fn annotate_examples() {
        let idx = customer_index();
        let b = keyed(&[&[150, 390], &[701]], false);
        let out = annotate_partitions(&idx, &b, "k").unwrap();
        let tags: Vec<i64> = out.rows().map(|r| r[1].as_key().unwrap()).collect();
        assert_eq!(tags, vec![1, 0, 5]);
        assert_eq!(out.schema.names(), vec!["k", PARTITION_COLUMN]);

        let empty = annotate_partitions(&idx, &keyed(&[], false), "k").unwrap();
        assert_eq!(empty.row_count(), 0);
    }

    #[test]
    fn annotate_type_mismatch() {
        let idx = customer_index();
        let schema = Arc::new(Schema::for_table(vec![Field::new("s", DataType::Str)]).unwrap());
        let b = PartitionedRelation::from_rows(schema, vec![vec![Value::str("x")]], 1);
        assert!(matches!(
            annotate_partitions(&idx, &b, "s"),
            Err(IndexError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn dump_round_trip() {
        let idx = customer_index();
        assert!(idx.dump().starts_with("1 200 1\n250 380 2\n"));
        let back =
            LearnedIndex::parse_dump(&idx.dump(), IndexSource::default(), DataType::Int64).unwrap();
        assert_eq!(back, idx);
        assert!(LearnedIndex::parse_dump("1 2", IndexSource::default(), DataType::Int64).is_err());
    }
}
