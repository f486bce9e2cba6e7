use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use super::{
    CategoricalColumn, ColumnData, ColumnKind, ColumnSpec, MetadataTable, Schema, TableError,
    NULL_CODE,
};

/// Per-column kind overrides applied before inference.
pub type KindHints = BTreeMap<String, ColumnKind>;

/// Maximum distinct-to-non-null ratio for a string column to be inferred categorical.
pub const CATEGORICAL_MAX_RATIO: f64 = 0.5;
/// Maximum distinct count for a string column to be inferred categorical.
pub const CATEGORICAL_MAX_DISTINCT: usize = 1000;

/// Reads a headed CSV stream into a [`MetadataTable`].
///
/// Empty fields are nulls. Columns without a hint are inferred: numeric when
/// every non-null value parses as a finite number, categorical when the
/// distinct ratio is at most 0.5 and there are at most 1000 distinct values,
/// text otherwise. The id column is the one hinted `id`, else the column
/// named `id` (case-insensitive).
pub fn ingest_table<R: Read>(source: R, hints: &KindHints) -> Result<MetadataTable, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let width = header.len();

    for name in hints.keys() {
        if !header.iter().any(|h| h == name) {
            return Err(TableError::UnknownColumn(name.clone()));
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        if record.len() != width {
            return Err(TableError::RaggedRow {
                line: record.position().map_or(0, |p| p.line()),
                expected: width,
                found: record.len(),
            });
        }
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(if field.is_empty() {
                None
            } else {
                Some(field.to_string())
            });
        }
    }
    let row_count = raw.first().map_or(0, Vec::len);
    if row_count == 0 {
        return Err(TableError::EmptySource);
    }

    let id_name = match hints.iter().find(|(_, k)| **k == ColumnKind::Id) {
        Some((name, _)) => name.clone(),
        None => header
            .iter()
            .find(|h| h.eq_ignore_ascii_case("id"))
            .cloned()
            .ok_or(TableError::MissingId)?,
    };

    let mut specs = Vec::with_capacity(width);
    let mut columns = Vec::with_capacity(width);
    for (name, values) in header.into_iter().zip(raw) {
        let kind = if name == id_name {
            ColumnKind::Id
        } else {
            match hints.get(&name) {
                Some(k) => *k,
                None => infer_kind(&values),
            }
        };
        let nullable = values.iter().any(Option::is_none);
        let data = build_column(&name, kind, values)?;
        specs.push(ColumnSpec {
            name,
            kind,
            nullable,
        });
        columns.push(data);
    }
    let schema = Schema::new(specs).map_err(TableError::InvalidSchema)?;
    MetadataTable::from_columns(schema, columns)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn infer_kind(values: &[Option<String>]) -> ColumnKind {
    let non_null: Vec<&str> = values.iter().flatten().map(String::as_str).collect();
    if non_null.iter().all(|v| parse_number(v).is_some()) {
        return ColumnKind::Numeric;
    }
    let mut distinct = HashSet::new();
    for v in &non_null {
        distinct.insert(*v);
        if distinct.len() > CATEGORICAL_MAX_DISTINCT {
            return ColumnKind::Text;
        }
    }
    let ratio = distinct.len() as f64 / non_null.len() as f64;
    if ratio <= CATEGORICAL_MAX_RATIO {
        ColumnKind::Categorical
    } else {
        ColumnKind::Text
    }
}

fn build_column(
    name: &str,
    kind: ColumnKind,
    values: Vec<Option<String>>,
) -> Result<ColumnData, TableError> {
    Ok(match kind {
        ColumnKind::Id => {
            let mut ids = Vec::with_capacity(values.len());
            for (row, v) in values.into_iter().enumerate() {
                ids.push(v.ok_or(TableError::NullId { row: row + 1 })?);
            }
            ColumnData::Id(ids)
        }
        ColumnKind::Numeric => {
            let mut out = Vec::with_capacity(values.len());
            for (row, v) in values.into_iter().enumerate() {
                out.push(match v {
                    None => None,
                    Some(s) => Some(parse_number(&s).ok_or_else(|| TableError::NotNumeric {
                        column: name.to_string(),
                        row: row + 1,
                        value: s,
                    })?),
                });
            }
            ColumnData::Numeric(out)
        }
        ColumnKind::Text => ColumnData::Text(values),
        ColumnKind::Categorical | ColumnKind::Label | ColumnKind::Prediction => {
            ColumnData::Categorical(encode_categorical(values))
        }
    })
}

pub(crate) fn encode_categorical(values: Vec<Option<String>>) -> CategoricalColumn {
    let mut dict: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, u32> = HashMap::new();
    let codes = values
        .into_iter()
        .map(|v| match v {
            None => NULL_CODE,
            Some(s) => match lookup.get(&s) {
                Some(c) => *c,
                None => {
                    let c = dict.len() as u32;
                    dict.push(s.clone());
                    lookup.insert(s, c);
                    c
                }
            },
        })
        .collect();
    CategoricalColumn {
        values: dict,
        codes,
    }
}
