//! JSON payloads shared by the live service and static bundles. Both sides
//! go through these functions so their bytes agree.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::state::{
    decode_state, derive_view, filter_rows, page_bounds, total_pages, AnalysisState, DerivedView, StateDoc, StateError, StateToken,
};
use crate::table::{InstanceRef, MetadataTable, Schema, Value};

/// Resolves the state to display: an explicit token wins over the default.
pub fn resolve_state(token: Option<&str>, default: &StateDoc, schema: &Schema) -> Result<AnalysisState, StateError> {
    match token {
        Some(t) if !t.is_empty() => decode_state(&StateToken::from_raw(t), schema),
        _ => AnalysisState::from_doc(default, schema),
    }
}

pub fn view_json(table: &MetadataTable, state: &AnalysisState) -> Result<String, StateError> {
    Ok(derive_view(table, state)?.to_json())
}

/// One page of table rows under a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePage {
    pub page: usize,
    pub page_size: usize,
    pub total_pages: usize,
    pub filtered_count: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Json>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<InstanceRef>>,
}

impl TablePage {
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("page serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }
}

/// Rows of `view`'s current page. `page` overrides the state's page.
pub fn table_page(
    table: &MetadataTable,
    state: &AnalysisState,
    page: Option<usize>,
    instance_base_uri: Option<&str>,
    instance_column: Option<&str>,
) -> Result<TablePage, StateError> {
    let mut state = state.clone();
    if let Some(p) = page {
        state.page = p;
    }
    let rows = filter_rows(table, &state)?;
    let (start, end) = page_bounds(rows.len(), state.page, state.page_size);
    Ok(build_page(
        table,
        &rows[start..end],
        state.page,
        state.page_size,
        rows.len(),
        instance_base_uri,
        instance_column,
    ))
}

pub fn page_of(
    table: &MetadataTable,
    view: &DerivedView,
    instance_base_uri: Option<&str>,
    instance_column: Option<&str>,
) -> TablePage {
    build_page(
        table,
        view.page_rows(),
        view.page,
        view.page_size,
        view.filtered_rows.len(),
        instance_base_uri,
        instance_column,
    )
}

fn build_page(
    table: &MetadataTable,
    rows: &[usize],
    page: usize,
    page_size: usize,
    filtered_count: usize,
    instance_base_uri: Option<&str>,
    instance_column: Option<&str>,
) -> TablePage {
    let data = rows
        .iter()
        .map(|&r| {
            table
                .columns()
                .iter()
                .map(|c| match c.value(r) {
                    Value::Null => Json::Null,
                    Value::Num(x) => serde_json::Number::from_f64(x).map_or(Json::Null, Json::Number),
                    Value::Str(s) => Json::String(s.to_string()),
                })
                .collect()
        })
        .collect();
    let instances = instance_base_uri.map(|base| {
        rows.iter()
            .map(|&r| InstanceRef::resolve(table, r, base, instance_column))
            .collect()
    });
    TablePage {
        page,
        page_size,
        total_pages: total_pages(filtered_count, page_size),
        filtered_count,
        columns: table.schema().columns().iter().map(|c| c.name.clone()).collect(),
        rows: data,
        instances,
    }
}
