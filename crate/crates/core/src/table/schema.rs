use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Role of a column in the metadata table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Id,
    Categorical,
    Numeric,
    Text,
    Label,
    Prediction,
}

impl ColumnKind {
    /// Kinds whose values come from a small closed set and are stored dictionary-encoded.
    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            ColumnKind::Categorical | ColumnKind::Label | ColumnKind::Prediction
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Id => "id",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
            ColumnKind::Text => "text",
            ColumnKind::Label => "label",
            ColumnKind::Prediction => "prediction",
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColumnKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "id" => ColumnKind::Id,
            "categorical" | "category" => ColumnKind::Categorical,
            "numeric" | "number" => ColumnKind::Numeric,
            "text" | "string" => ColumnKind::Text,
            "label" => ColumnKind::Label,
            "prediction" | "pred" => ColumnKind::Prediction,
            other => return Err(format!("unknown column kind '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub nullable: bool,
}

/// Ordered list of column specs, validated on construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<Vec<ColumnSpec>> for Schema {
    type Error = String;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self, String> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<ColumnSpec> {
    fn from(s: Schema) -> Self {
        s.columns
    }
}

impl Schema {
    /// Checks the schema invariants: unique non-empty names, exactly one id
    /// column, at most one label and one prediction column.
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, String> {
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err("column names must be non-empty".into());
            }
            if !seen.insert(c.name.as_str()) {
                return Err(format!("duplicate column name '{}'", c.name));
            }
        }
        for (kind, what) in [
            (ColumnKind::Id, "id"),
            (ColumnKind::Label, "label"),
            (ColumnKind::Prediction, "prediction"),
        ] {
            let count = columns.iter().filter(|c| c.kind == kind).count();
            if kind == ColumnKind::Id && count != 1 {
                return Err(format!("expected exactly one id column, found {count}"));
            }
            if count > 1 {
                return Err(format!("at most one {what} column is supported, found {count}"));
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn id_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Id)
            .expect("schema invariant: one id column")
    }

    pub fn first_of_kind(&self, kind: ColumnKind) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.kind == kind)
    }
}
