use serde::{Deserialize, Serialize};

use super::{categorical, subset_rows, ModelError};
use crate::table::{CategoricalColumn, MetadataTable, NULL_CODE};

/// Rows are true labels, columns predictions, both over `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl ConfusionMatrix {
    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(class)).ok()
    }

    pub fn count(&self, label: &str, pred: &str) -> u64 {
        match (self.class_index(label), self.class_index(pred)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.classes.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

/// Sorted union of the non-null values present anywhere in the two columns.
pub(crate) fn observed_classes(labels: &CategoricalColumn, preds: &CategoricalColumn) -> Vec<String> {
    let mut seen_l = vec![false; labels.dictionary().len()];
    let mut seen_p = vec![false; preds.dictionary().len()];
    for &c in labels.codes() {
        if c != NULL_CODE {
            seen_l[c as usize] = true;
        }
    }
    for &c in preds.codes() {
        if c != NULL_CODE {
            seen_p[c as usize] = true;
        }
    }
    let mut classes: Vec<String> = labels
        .dictionary()
        .iter()
        .zip(seen_l)
        .chain(preds.dictionary().iter().zip(seen_p))
        .filter(|(_, s)| *s)
        .map(|(v, _)| v.clone())
        .collect();
    classes.sort();
    classes.dedup();
    classes
}

/// Maps dictionary codes of `col` to positions in the sorted `classes`.
pub(crate) fn code_to_class(col: &CategoricalColumn, classes: &[String]) -> Vec<usize> {
    col.dictionary()
        .iter()
        .map(|v| classes.binary_search(v).unwrap_or(usize::MAX))
        .collect()
}

/// Counts (label, prediction) pairs. Rows where either is null are not
/// scored. Classes come from the whole table so that matrices over different
/// subsets line up.
pub fn confusion_matrix<S: AsRef<str>>(
    table: &MetadataTable,
    label_col: &str,
    pred_col: &str,
    id_subset: Option<&[S]>,
) -> Result<ConfusionMatrix, ModelError> {
    let labels = categorical(table, label_col)?;
    let preds = categorical(table, pred_col)?;
    let rows = subset_rows(table, id_subset)?;
    let classes = observed_classes(labels, preds);
    let lmap = code_to_class(labels, &classes);
    let pmap = code_to_class(preds, &classes);
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    let mut total = 0;
    for r in rows {
        let (l, p) = (labels.codes()[r], preds.codes()[r]);
        if l == NULL_CODE || p == NULL_CODE {
            continue;
        }
        counts[lmap[l as usize]][pmap[p as usize]] += 1;
        total += 1;
    }
    Ok(ConfusionMatrix {
        classes,
        counts,
        total,
    })
}
