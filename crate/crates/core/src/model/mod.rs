//! Model-performance analyses over label/prediction columns.

mod confusion;
mod hierarchy;
mod subgroups;

use thiserror::Error;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use hierarchy::{hierarchical_confusion, HierarchicalConfusion, HierarchyNode, LabelHierarchy, NodeConfusion, OUTSIDE};
pub use subgroups::{
    subgroup_metrics, MetricRegistry, SubgroupCounts, SubgroupMetric, SubgroupParams, SubgroupReport, SubgroupRow,
    MAX_SUBGROUPS,
};

use crate::table::{CategoricalColumn, ColumnData, MetadataTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("column '{0}' is not categorical")]
    NonCategorical(String),
    #[error("id '{0}' is not in the table")]
    UnknownId(String),
    #[error("class '{0}' is not a leaf of the hierarchy")]
    UnknownClass(String),
    #[error("subgroup cross product has {0} combinations (limit {MAX_SUBGROUPS})")]
    CardinalityExplosion(u128),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
}

pub(crate) fn categorical<'a>(table: &'a MetadataTable, name: &str) -> Result<&'a CategoricalColumn, ModelError> {
    let (_, data) = table
        .column(name)
        .map_err(|_| ModelError::UnknownColumn(name.to_string()))?;
    match data {
        ColumnData::Categorical(c) => Ok(c),
        _ => Err(ModelError::NonCategorical(name.to_string())),
    }
}

/// Row indices selected by an optional id subset, in table order.
pub(crate) fn subset_rows<S: AsRef<str>>(table: &MetadataTable, subset: Option<&[S]>) -> Result<Vec<usize>, ModelError> {
    match subset {
        None => Ok((0..table.row_count()).collect()),
        Some(ids) => {
            let index = table.id_index();
            let mut mask = vec![false; table.row_count()];
            for id in ids {
                let row = index
                    .get(id.as_ref())
                    .ok_or_else(|| ModelError::UnknownId(id.as_ref().to_string()))?;
                mask[*row] = true;
            }
            Ok(mask.iter().enumerate().filter_map(|(i, m)| m.then_some(i)).collect())
        }
    }
}
