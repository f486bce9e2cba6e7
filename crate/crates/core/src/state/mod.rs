//! Shared analysis state: filter, grouping, selection and page cursor.
//!
//! Every component renders from a [`DerivedView`] computed by
//! [`derive_view`], which is a pure function of the table and the state. The
//! state round-trips through a URL-safe [`StateToken`].

mod filter;
mod token;
mod view;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{parse_filter, CmpOp, Expr, Filter, FilterError, Literal};
pub use token::{decode_state, encode_state, StateToken};
pub(crate) use view::page_bounds;
pub use view::{derive_view, filter_rows, paginate, total_pages, DerivedView, Group};

use crate::table::Schema;

pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("malformed state token: {0}")]
    MalformedToken(String),
    #[error("invalid state: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidState(Vec<FieldError>),
}

/// One invalid field of a state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisState {
    pub filter: Filter,
    pub group_by: Option<String>,
    pub selected: BTreeSet<String>,
    pub page: usize,
    pub page_size: usize,
}

impl Default for AnalysisState {
    fn default() -> Self {
        Self {
            filter: Filter::match_all(),
            group_by: None,
            selected: BTreeSet::new(),
            page: 0,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

/// Schema-free form of [`AnalysisState`]; the filter is kept as text. This is
/// exactly what a state token encodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub filter: String,
    pub group_by: Option<String>,
    pub page: usize,
    pub page_size: usize,
    pub selected: Vec<String>,
}

impl Default for StateDoc {
    fn default() -> Self {
        AnalysisState::default().to_doc()
    }
}

impl AnalysisState {
    pub fn to_doc(&self) -> StateDoc {
        StateDoc {
            filter: self.filter.to_text(),
            group_by: self.group_by.clone(),
            page: self.page,
            page_size: self.page_size,
            selected: self.selected.iter().cloned().collect(),
        }
    }

    /// Binds a document to `schema`, collecting every invalid field.
    pub fn from_doc(doc: &StateDoc, schema: &Schema) -> Result<Self, StateError> {
        let mut errors = Vec::new();
        let filter = match Filter::parse(&doc.filter, schema) {
            Ok(f) => f,
            Err(e) => {
                errors.push(FieldError {
                    field: "filter",
                    message: e.to_string(),
                });
                Filter::match_all()
            }
        };
        let state = Self {
            filter,
            group_by: doc.group_by.clone(),
            selected: doc.selected.iter().cloned().collect(),
            page: doc.page,
            page_size: doc.page_size,
        };
        errors.extend(state.field_errors(schema));
        if errors.is_empty() {
            Ok(state)
        } else {
            Err(StateError::InvalidState(errors))
        }
    }

    fn field_errors(&self, schema: &Schema) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if let Err(e) = self.filter.check(schema) {
            errors.push(FieldError {
                field: "filter",
                message: e.to_string(),
            });
        }
        if let Some(g) = &self.group_by {
            match schema.get(g) {
                None => errors.push(FieldError {
                    field: "group_by",
                    message: format!("unknown column '{g}'"),
                }),
                Some(c) if !c.kind.is_categorical() => errors.push(FieldError {
                    field: "group_by",
                    message: format!("column '{g}' is {}, not categorical", c.kind),
                }),
                Some(_) => {}
            }
        }
        if self.page_size == 0 || self.page_size > MAX_PAGE_SIZE {
            errors.push(FieldError {
                field: "page_size",
                message: format!("must be in 1..={MAX_PAGE_SIZE}, got {}", self.page_size),
            });
        }
        errors
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), StateError> {
        let errors = self.field_errors(schema);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(StateError::InvalidState(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ingest_table, ColumnKind, KindHints};

    fn schema() -> Schema {
        let mut hints = KindHints::new();
        hints.insert("split".into(), ColumnKind::Categorical);
        ingest_table("id,split,score\na,train,1\n".as_bytes(), &hints)
            .unwrap()
            .schema()
            .clone()
    }

    #[test]
    fn errors_are_reported_per_field() {
        let doc = StateDoc {
            filter: "nope == 'x'".into(),
            group_by: Some("score".into()),
            page: 0,
            page_size: 0,
            selected: vec![],
        };
        match AnalysisState::from_doc(&doc, &schema()) {
            Err(StateError::InvalidState(errs)) => {
                let fields: Vec<_> = errs.iter().map(|e| e.field).collect();
                assert_eq!(fields, ["filter", "group_by", "page_size"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn page_size_upper_bound() {
        let s = AnalysisState {
            page_size: MAX_PAGE_SIZE + 1,
            ..Default::default()
        };
        assert!(s.validate(&schema()).is_err());
        let ok = AnalysisState {
            page_size: MAX_PAGE_SIZE,
            ..Default::default()
        };
        assert!(ok.validate(&schema()).is_ok());
    }
}
