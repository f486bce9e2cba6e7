//! Metadata table, embedding matrix and per-column distribution summaries.
//!
//! A [`MetadataTable`] is columnar and immutable once built. Categorical-valued
//! columns (categorical, label, prediction) are dictionary encoded so that
//! filtering and grouping over millions of rows only touches `u32` codes.

mod embeddings;
mod files;
mod ingest;
mod schema;
mod summary;

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

pub use embeddings::{fnv1a64_ids, EmbeddingMatrix, EmbeddingMeta};
pub use files::{load_table, read_schema_hints, schema_path, write_schema_sidecar};
pub use ingest::{ingest_table, KindHints};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use summary::{column_summary, Bin, BinKey, DistributionSummary};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("source has no data rows")]
    EmptySource,
    #[error("duplicate id value '{0}'")]
    DuplicateId(String),
    #[error("row {row}: id column is empty")]
    NullId { row: usize },
    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("no id column: name a column 'id' or pass an id kind hint")]
    MissingId,
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column '{column}' row {row}: value '{value}' is not a finite number")]
    NotNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("embedding stream is {actual} bytes, expected {expected} for n={n}, d={d}")]
    SizeMismatch {
        n: usize,
        d: usize,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite embedding value at flat index {index} (row {row}, col {col})")]
    NonFinite { index: usize, row: usize, col: usize },
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("embeddings have {embedding_rows} rows but the table has {table_rows}")]
    RowCountMismatch {
        embedding_rows: usize,
        table_rows: usize,
    },
    #[error("embedding id checksum {found} does not match table ids ({expected})")]
    ChecksumMismatch { expected: String, found: String },
    #[error("bad embedding metadata {path}: {reason}")]
    BadMeta { path: PathBuf, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const NULL_CODE: u32 = u32::MAX;

/// Dictionary-encoded categorical column. `values` is in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    pub(crate) values: Vec<String>,
    pub(crate) codes: Vec<u32>,
}

impl CategoricalColumn {
    pub fn dictionary(&self) -> &[String] {
        &self.values
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn code_of(&self, value: &str) -> Option<u32> {
        self.values.iter().position(|v| v == value).map(|p| p as u32)
    }

    pub fn get(&self, row: usize) -> Option<&str> {
        match self.codes[row] {
            NULL_CODE => None,
            c => Some(&self.values[c as usize]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Id(Vec<String>),
    Numeric(Vec<Option<f64>>),
    Categorical(CategoricalColumn),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Id(v) => v.len(),
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(c) => c.codes.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match self {
            ColumnData::Id(v) => Value::Str(&v[row]),
            ColumnData::Numeric(v) => v[row].map_or(Value::Null, Value::Num),
            ColumnData::Categorical(c) => c.get(row).map_or(Value::Null, Value::Str),
            ColumnData::Text(v) => v[row].as_deref().map_or(Value::Null, Value::Str),
        }
    }

    /// String view of a cell, `None` for null or numeric cells.
    pub fn str_at(&self, row: usize) -> Option<&str> {
        match self.value(row) {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// A single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Null,
    Num(f64),
    Str(&'a str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetadataTable {
    schema: Schema,
    columns: Vec<ColumnData>,
    id_col: usize,
    row_count: usize,
}

impl MetadataTable {
    /// Builds a table from already-typed columns, checking that lengths and
    /// id uniqueness hold.
    pub fn from_columns(schema: Schema, columns: Vec<ColumnData>) -> Result<Self, TableError> {
        if schema.len() != columns.len() {
            return Err(TableError::InvalidSchema(format!(
                "{} column specs but {} columns",
                schema.len(),
                columns.len()
            )));
        }
        let row_count = columns.first().map_or(0, ColumnData::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != row_count {
                return Err(TableError::InvalidSchema(format!(
                    "column '{}' has {} rows, expected {row_count}",
                    spec.name,
                    col.len()
                )));
            }
            let storage_ok = match col {
                ColumnData::Id(_) => spec.kind == ColumnKind::Id,
                ColumnData::Numeric(_) => spec.kind == ColumnKind::Numeric,
                ColumnData::Categorical(_) => spec.kind.is_categorical(),
                ColumnData::Text(_) => spec.kind == ColumnKind::Text,
            };
            if !storage_ok {
                return Err(TableError::InvalidSchema(format!(
                    "column '{}' storage does not match kind {}",
                    spec.name, spec.kind
                )));
            }
        }
        let id_col = schema
            .index_of(&schema.id_column().name)
            .expect("id column present");
        let ColumnData::Id(ids) = &columns[id_col] else {
            unreachable!("checked above")
        };
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for id in ids {
            if !seen.insert(id.as_str()) {
                return Err(TableError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            schema,
            columns,
            id_col,
            row_count,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn ids(&self) -> &[String] {
        match &self.columns[self.id_col] {
            ColumnData::Id(ids) => ids,
            _ => unreachable!("id column storage"),
        }
    }

    pub fn id(&self, row: usize) -> &str {
        &self.ids()[row]
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<(&ColumnSpec, &ColumnData), TableError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))?;
        Ok((&self.schema.columns()[idx], &self.columns[idx]))
    }

    /// Map from id to row index. Built on demand; callers that need it
    /// repeatedly should keep the result.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Schema kinds as ingestion hints, so re-ingesting [`to_csv`](Self::to_csv)
    /// output reproduces this table exactly.
    pub fn kind_hints(&self) -> KindHints {
        self.schema
            .columns()
            .iter()
            .map(|c| (c.name.clone(), c.kind))
            .collect()
    }

    /// Serializes the table as RFC-4180 CSV; nulls become empty fields.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), TableError> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(self.schema.columns().iter().map(|c| c.name.as_str()))?;
        let mut record: Vec<String> = Vec::with_capacity(self.columns.len());
        for row in 0..self.row_count {
            record.clear();
            for col in &self.columns {
                record.push(match col.value(row) {
                    Value::Null => String::new(),
                    Value::Num(x) => x.to_string(),
                    Value::Str(s) => s.to_string(),
                });
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, TableError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }
}

/// Locator for a raw sample. Samples are referenced, never copied.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct InstanceRef {
    pub id: String,
    pub uri: String,
    pub media_kind: MediaKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Image,
    Audio,
    Other,
}

impl MediaKind {
    pub fn from_path(path: &str) -> Self {
        let ext = path
            .rsplit_once('.')
            .map(|(_, e)| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "png" | "jpg" | "jpeg" | "gif" | "bmp" | "webp" | "svg" => MediaKind::Image,
            "wav" | "mp3" | "ogg" | "flac" | "m4a" => MediaKind::Audio,
            _ => MediaKind::Other,
        }
    }

    pub fn content_type(self, path: &str) -> &'static str {
        let ext = path
            .rsplit_once('.')
            .map(|(_, e)| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "png" => "image/png",
            "jpg" | "jpeg" => "image/jpeg",
            "gif" => "image/gif",
            "bmp" => "image/bmp",
            "webp" => "image/webp",
            "svg" => "image/svg+xml",
            "wav" => "audio/wav",
            "mp3" => "audio/mpeg",
            "ogg" => "audio/ogg",
            "flac" => "audio/flac",
            _ => "application/octet-stream",
        }
    }
}

impl InstanceRef {
    /// Resolves the raw-sample locator for a row. `locator` is the value of
    /// the table column naming the sample (falls back to the id).
    pub fn resolve(table: &MetadataTable, row: usize, base_uri: &str, column: Option<&str>) -> Self {
        let id = table.id(row).to_string();
        let rel = column
            .and_then(|c| table.column(c).ok())
            .and_then(|(_, data)| data.str_at(row).map(str::to_string))
            .unwrap_or_else(|| id.clone());
        let uri = if rel.contains("://") || base_uri.is_empty() {
            rel
        } else {
            format!("{}/{}", base_uri.trim_end_matches('/'), rel.trim_start_matches('/'))
        };
        let media_kind = MediaKind::from_path(&uri);
        Self { id, uri, media_kind }
    }
}
