use serde::{Deserialize, Serialize};

use super::{AnalysisState, StateError};
use crate::table::{ColumnData, MetadataTable, NULL_CODE};

/// Ids sharing one value of the group-by column; `value` is `None` for nulls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub value: Option<String>,
    pub ids: Vec<String>,
}

/// Snapshot of the table as seen through a state. All id lists keep table
/// row order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedView {
    pub filtered_ids: Vec<String>,
    /// Present only when the state groups; ordered by value, null group last.
    pub groups: Option<Vec<Group>>,
    pub selected_visible: Vec<String>,
    pub page_ids: Vec<String>,
    pub page: usize,
    pub page_size: usize,
    pub total_pages: usize,
    /// Row indices behind `filtered_ids`.
    #[serde(skip)]
    pub filtered_rows: Vec<usize>,
}

impl DerivedView {
    /// Canonical JSON (sorted keys, minified). Live and static consumers
    /// compare these bytes.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("view serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    pub fn page_rows(&self) -> &[usize] {
        let (start, end) = page_bounds(self.filtered_rows.len(), self.page, self.page_size);
        &self.filtered_rows[start..end]
    }
}

pub fn total_pages(len: usize, page_size: usize) -> usize {
    len.div_ceil(page_size.max(1))
}

pub(crate) fn page_bounds(len: usize, page: usize, page_size: usize) -> (usize, usize) {
    let start = page.saturating_mul(page_size).min(len);
    let end = start.saturating_add(page_size).min(len);
    (start, end)
}

/// Slice of `view.filtered_ids` for one page; empty when out of range.
pub fn paginate(view: &DerivedView, page: usize, page_size: usize) -> Vec<String> {
    let (start, end) = page_bounds(view.filtered_ids.len(), page, page_size.max(1));
    view.filtered_ids[start..end].to_vec()
}

/// Rows passing the state's filter, in table order. Cheaper than
/// [`derive_view`] when only a page is needed.
pub fn filter_rows(table: &MetadataTable, state: &AnalysisState) -> Result<Vec<usize>, StateError> {
    state.validate(table.schema())?;
    let mask = state
        .filter
        .evaluate(table)
        .map_err(|e| StateError::InvalidState(vec![super::FieldError {
            field: "filter",
            message: e.to_string(),
        }]))?;
    Ok(mask
        .iter()
        .enumerate()
        .filter_map(|(i, keep)| keep.then_some(i))
        .collect())
}

/// Applies `state` to `table`.
pub fn derive_view(table: &MetadataTable, state: &AnalysisState) -> Result<DerivedView, StateError> {
    let filtered_rows = filter_rows(table, state)?;
    let ids = table.ids();
    let filtered_ids: Vec<String> = filtered_rows.iter().map(|&r| ids[r].clone()).collect();

    let groups = state.group_by.as_deref().map(|col| {
        let (_, data) = table.column(col).expect("validated group column");
        let ColumnData::Categorical(cat) = data else {
            unreachable!("validated categorical group column")
        };
        let mut buckets: Vec<Vec<String>> = vec![Vec::new(); cat.dictionary().len()];
        let mut nulls = Vec::new();
        for &r in &filtered_rows {
            match cat.codes()[r] {
                NULL_CODE => nulls.push(ids[r].clone()),
                c => buckets[c as usize].push(ids[r].clone()),
            }
        }
        let mut groups: Vec<Group> = cat
            .dictionary()
            .iter()
            .zip(buckets)
            .filter(|(_, ids)| !ids.is_empty())
            .map(|(v, ids)| Group {
                value: Some(v.clone()),
                ids,
            })
            .collect();
        groups.sort_by(|a, b| a.value.cmp(&b.value));
        if !nulls.is_empty() {
            groups.push(Group {
                value: None,
                ids: nulls,
            });
        }
        groups
    });

    let selected_visible = if state.selected.is_empty() {
        Vec::new()
    } else {
        filtered_ids
            .iter()
            .filter(|id| state.selected.contains(*id))
            .cloned()
            .collect()
    };
    let (start, end) = page_bounds(filtered_ids.len(), state.page, state.page_size);
    Ok(DerivedView {
        page_ids: filtered_ids[start..end].to_vec(),
        total_pages: total_pages(filtered_ids.len(), state.page_size),
        page: state.page,
        page_size: state.page_size,
        filtered_ids,
        groups,
        selected_visible,
        filtered_rows,
    })
}
