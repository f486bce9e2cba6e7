//! Dataset and model analysis engine: a columnar metadata table, a shared
//! filter/group/select state, embedding and model analyses, and static
//! dashboard bundles.

pub mod analytics;
pub mod artifact;
pub mod bundle;
pub mod model;
pub mod payload;
pub mod service;
pub mod state;
pub mod table;
