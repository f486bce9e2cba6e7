//! Embedding-space analyses: duplicate groups, familiarity and 2D projection.

mod cosine;
mod duplicates;
mod gmm;
mod projection;

use thiserror::Error;

pub use cosine::cosine_distance;
pub use duplicates::{
    find_duplicates, find_duplicates_with, knn_edges, knn_recall, DuplicateGroups, DuplicateParams,
    SearchStrategy, EXACT_SEARCH_LIMIT,
};
pub use gmm::{default_components, familiarity_scores, fit_gmm, FamiliarityScores, GmmConfig, GmmModel, VARIANCE_FLOOR};
pub use projection::{project_2d, ProjectionMethod, Projection2D, NEIGHBOR_EMBED_ITERATIONS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("zero vector at row {0}")]
    ZeroVector(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: model has d={model}, embeddings have d={data}")]
    DimensionMismatch { model: usize, data: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
