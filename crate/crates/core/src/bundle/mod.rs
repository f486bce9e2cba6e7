//! Dashboard specs and static bundles.
//!
//! Bundle layout:
//!
//! ```text
//! index.html
//! spec.v1
//! manifest.v1
//! data/table.csv
//! data/state.token
//! data/artifacts/<kind>.v1
//! ```

mod export;
mod spec;
mod validate;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{export_bundle, INDEX_HTML};
pub use spec::{
    build_spec, ComponentConfig, ComponentInstance, DashboardSpec, Page, PageAssignment, SpecInput, ValidationError,
    ValidationErrors, WidthHint, SPEC_VERSION,
};
pub use validate::{validate_bundle, BundleReport, Finding, FindingCode, Severity};

use crate::artifact::{load_artifact_dir, AnalysisArtifact, ArtifactError, ArtifactKind, ArtifactSet};
use crate::payload::{resolve_state, table_page};
use crate::state::{derive_view, StateDoc, StateError, StateToken};
use crate::table::{ingest_table, MetadataTable, TableError};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.v1";
pub const SPEC_FILE: &str = "spec.v1";
pub const INDEX_FILE: &str = "index.html";
pub const TABLE_FILE: &str = "data/table.csv";
pub const STATE_FILE: &str = "data/state.token";
pub const ARTIFACT_DIR: &str = "data/artifacts";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("MissingArtifact(\"{0}\"): a component needs the {0} artifact but none was computed")]
    MissingArtifact(ArtifactKind),
    #[error("table schema does not match the dashboard spec")]
    SchemaMismatch,
    #[error("unsupported spec version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid spec: {0}")]
    Spec(#[from] serde_json::Error),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub spec_version: u32,
    pub created_unix: u64,
    /// Sorted by path. The manifest does not list itself.
    pub files: Vec<ManifestEntry>,
}

impl BundleManifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    pub fn total_size(&self) -> u64 {
        self.files.iter().map(|f| f.size).sum()
    }
}

/// An exported bundle loaded back for reading, as a static viewer would.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub spec: DashboardSpec,
    pub table: MetadataTable,
    pub initial_token: StateToken,
    pub artifacts: ArtifactSet,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Self, BundleError> {
        let spec_path = dir.join(SPEC_FILE);
        let spec: DashboardSpec = serde_json::from_slice(&std::fs::read(&spec_path).map_err(io_err(&spec_path))?)?;
        if spec.version != SPEC_VERSION {
            return Err(BundleError::UnsupportedVersion(spec.version));
        }
        let table_path = dir.join(TABLE_FILE);
        let file = std::fs::File::open(&table_path).map_err(io_err(&table_path))?;
        let hints = spec.schema.columns().iter().map(|c| (c.name.clone(), c.kind)).collect();
        let table = ingest_table(std::io::BufReader::new(file), &hints)?;
        if table.schema() != &spec.schema {
            return Err(BundleError::SchemaMismatch);
        }
        let state_path = dir.join(STATE_FILE);
        let token = std::fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
        let artifacts = load_artifact_dir(&dir.join(ARTIFACT_DIR))?;
        Ok(Bundle {
            spec,
            table,
            initial_token: StateToken::from_raw(token.trim()),
            artifacts,
        })
    }

    fn initial_doc(&self) -> Result<StateDoc, StateError> {
        self.initial_token.to_doc()
    }

    /// View payload for `token`, or for the baked-in state when absent.
    pub fn view_json(&self, token: Option<&str>) -> Result<String, StateError> {
        let state = resolve_state(token, &self.initial_doc()?, self.table.schema())?;
        Ok(derive_view(&self.table, &state)?.to_json())
    }

    pub fn table_page_json(&self, token: Option<&str>, page: Option<usize>) -> Result<String, StateError> {
        let state = resolve_state(token, &self.initial_doc()?, self.table.schema())?;
        Ok(table_page(
            &self.table,
            &state,
            page,
            self.spec.instance_base_uri.as_deref(),
            self.spec.instance_column.as_deref(),
        )?
        .to_json())
    }

    pub fn artifact(&self, kind: ArtifactKind) -> Option<&AnalysisArtifact> {
        self.artifacts.get(&kind)
    }
}
