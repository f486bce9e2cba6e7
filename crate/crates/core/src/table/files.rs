use std::path::{Path, PathBuf};

use super::{ingest_table, KindHints, MetadataTable, Schema, TableError};

/// `<dir>/<stem>.schema.json` next to a table file.
pub fn schema_path(table_path: &Path) -> PathBuf {
    let stem = table_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    table_path.with_file_name(format!("{stem}.schema.json"))
}

pub fn write_schema_sidecar(table_path: &Path, schema: &Schema) -> Result<PathBuf, TableError> {
    let path = schema_path(table_path);
    let mut text = serde_json::to_string_pretty(schema).expect("schema serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Kinds recorded in the schema sidecar, if there is one.
pub fn read_schema_hints(table_path: &Path) -> Result<KindHints, TableError> {
    let path = schema_path(table_path);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(KindHints::new()),
        Err(e) => return Err(e.into()),
    };
    let schema: Schema = serde_json::from_str(&text).map_err(|e| TableError::InvalidSchema(format!("{}: {e}", path.display())))?;
    Ok(schema.columns().iter().map(|c| (c.name.clone(), c.kind)).collect())
}

/// Reads a CSV table, taking column kinds from its schema sidecar when
/// present. `overrides` win over the sidecar.
pub fn load_table(path: &Path, overrides: &KindHints) -> Result<MetadataTable, TableError> {
    let mut hints = read_schema_hints(path)?;
    hints.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
    let file = std::fs::File::open(path)?;
    ingest_table(std::io::BufReader::new(file), &hints)
}
