//! Reading delimited text: comma-separated CSV (optional header) and
//! pipe-delimited `.tbl` files as written by TPC-H dbgen.

use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use crate::value::{DataType, Row, Value};

use super::relation::{Field, Schema};
use super::StorageError;

/// Rows sampled when inferring column types.
pub const INFER_SAMPLE_ROWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    /// Pipe-delimited, no header, trailing `|` allowed.
    Tbl,
}

impl Format {
    fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tbl => b'|',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Tbl => "tbl",
        }
    }
}

impl FromStr for Format {
    type Err = StorageError;

    fn from_str(s: &str) -> Result<Format, StorageError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "tbl" | "pipe" | "pipe-delimited" | "psv" => Ok(Format::Tbl),
            other => Err(StorageError::UnsupportedFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of sniffing a file: its schema and whether the first record is a
/// header.
#[derive(Debug, Clone, PartialEq)]
pub struct FileLayout {
    pub schema: Schema,
    pub header: bool,
}

fn open(path: &Path, format: Format) -> Result<csv::Reader<File>, StorageError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => StorageError::FileNotFound(path.to_path_buf()),
        _ => StorageError::Io(format!("{}: {e}", path.display())),
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(format.delimiter())
        .from_reader(file))
}

fn fields_of(record: &csv::StringRecord, format: Format) -> Vec<&str> {
    let mut fields: Vec<&str> = record.iter().collect();
    if format == Format::Tbl && fields.len() > 1 && fields.last() == Some(&"") {
        fields.pop();
    }
    fields
}

fn io_err(path: &Path, e: csv::Error) -> StorageError {
    StorageError::Io(format!("{}: {e}", path.display()))
}

/// Reads up to `limit` raw records.
fn sample(path: &Path, format: Format, limit: usize) -> Result<Vec<Vec<String>>, StorageError> {
    let mut reader = open(path, format)?;
    let mut out = Vec::new();
    for record in reader.records().take(limit) {
        let record = record.map_err(|e| io_err(path, e))?;
        out.push(
            fields_of(&record, format)
                .into_iter()
                .map(str::to_string)
                .collect(),
        );
    }
    Ok(out)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_ragged(records: &[Vec<String>], first_row: usize) -> Result<usize, StorageError> {
    let width = records[0].len();
    for (i, r) in records.iter().enumerate() {
        if r.len() != width {
            return Err(StorageError::RaggedRows {
                row: first_row + i,
                expected: width,
                found: r.len(),
            });
        }
    }
    Ok(width)
}

fn infer_types(records: &[Vec<String>], width: usize) -> Vec<DataType> {
    (0..width)
        .map(|c| {
            records
                .iter()
                .map(|r| DataType::sniff(&r[c]))
                .reduce(DataType::widen)
                .unwrap_or(DataType::Str)
        })
        .collect()
}

/// Infers the column types of a file from its first [`INFER_SAMPLE_ROWS`]
/// data rows. `header` forces header handling for CSV; `None` sniffs it.
/// `names` supplies column names for headerless files.
pub fn infer_layout(
    path: &Path,
    format: Format,
    header: Option<bool>,
    names: Option<&[&str]>,
) -> Result<FileLayout, StorageError> {
    let mut records = sample(path, format, INFER_SAMPLE_ROWS + 1)?;
    let header = match (format, header) {
        (Format::Tbl, _) => false,
        (Format::Csv, Some(h)) => h,
        (Format::Csv, None) => detect_header(&records),
    };
    let header_names = if header && !records.is_empty() {
        Some(records.remove(0))
    } else {
        None
    };
    records.truncate(INFER_SAMPLE_ROWS);
    if records.is_empty() {
        return Err(StorageError::EmptyFile(path.to_path_buf()));
    }
    let width = check_ragged(&records, 1)?;
    let types = infer_types(&records, width);
    let names: Vec<String> = match (header_names, names) {
        (Some(h), _) => {
            if h.len() != width {
                return Err(StorageError::RaggedRows {
                    row: 0,
                    expected: width,
                    found: h.len(),
                });
            }
            h
        }
        (None, Some(n)) if n.len() == width => n.iter().map(|s| s.to_string()).collect(),
        _ => (1..=width).map(|i| format!("c{i}")).collect(),
    };
    let fields = names
        .into_iter()
        .zip(types)
        .map(|(n, t)| Field::new(n, t))
        .collect();
    Ok(FileLayout {
        schema: Schema::for_table(fields)?,
        header,
    })
}

/// Infers a schema with default header detection and generic names.
pub fn infer_schema(path: &Path, format: Format) -> Result<Schema, StorageError> {
    infer_layout(path, format, None, None).map(|l| l.schema)
}

/// A first record counts as a header when every field is an identifier and
/// at least one column of the following rows is not textual.
fn detect_header(records: &[Vec<String>]) -> bool {
    if records.len() < 2 || !records[0].iter().all(|f| is_identifier(f)) {
        return false;
    }
    let rest = &records[1..];
    let Ok(width) = check_ragged(rest, 2) else {
        return false;
    };
    width == records[0].len() && infer_types(rest, width).iter().any(|t| *t != DataType::Str)
}

/// Parses every data row of the file against `schema`. Row numbers in
/// errors are 1-based data rows.
pub fn read_rows(
    path: &Path,
    format: Format,
    header: bool,
    schema: &Schema,
) -> Result<Vec<Row>, StorageError> {
    let mut reader = open(path, format)?;
    let types = schema.types();
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut line = 0usize;
    while reader
        .read_record(&mut record)
        .map_err(|e| io_err(path, e))?
    {
        line += 1;
        if header && line == 1 {
            continue;
        }
        let row_no = if header { line - 1 } else { line };
        let fields = fields_of(&record, format);
        if fields.len() != types.len() {
            return Err(StorageError::RaggedRows {
                row: row_no,
                expected: types.len(),
                found: fields.len(),
            });
        }
        let row = fields
            .iter()
            .zip(&types)
            .enumerate()
            .map(|(c, (f, t))| {
                Value::parse_as(f, *t).ok_or_else(|| StorageError::ParseError {
                    row: row_no,
                    column: schema.fields()[c].name.clone(),
                    value: f.to_string(),
                    data_type: *t,
                })
            })
            .collect::<Result<Row, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}
