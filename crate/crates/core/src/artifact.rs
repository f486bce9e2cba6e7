//! Analysis artifacts and their on-disk form.
//!
//! Every artifact file is a JSON object `{"data", "kind", "params",
//! "version"}` with sorted keys and floating-point numbers rounded to nine
//! significant digits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analytics::{DuplicateGroups, FamiliarityScores, GmmModel, Projection2D, ProjectionMethod};
use crate::model::{ConfusionMatrix, HierarchicalConfusion, SubgroupReport};
use crate::table::{DistributionSummary, MetadataTable};

pub const ARTIFACT_VERSION: u32 = 1;
pub const ARTIFACT_EXT: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Summary,
    Duplicates,
    Familiarity,
    Projection,
    Confusion,
    Hierarchy,
    Subgroups,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 7] = [
        ArtifactKind::Summary,
        ArtifactKind::Duplicates,
        ArtifactKind::Familiarity,
        ArtifactKind::Projection,
        ArtifactKind::Confusion,
        ArtifactKind::Hierarchy,
        ArtifactKind::Subgroups,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Summary => "summary",
            ArtifactKind::Duplicates => "duplicates",
            ArtifactKind::Familiarity => "familiarity",
            ArtifactKind::Projection => "projection",
            ArtifactKind::Confusion => "confusion",
            ArtifactKind::Hierarchy => "hierarchy",
            ArtifactKind::Subgroups => "subgroups",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.{ARTIFACT_EXT}", self.as_str())
    }

    /// Whether the analysis runs on embeddings rather than the table alone.
    pub fn needs_embeddings(self) -> bool {
        matches!(
            self,
            ArtifactKind::Duplicates | ArtifactKind::Familiarity | ArtifactKind::Projection
        )
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown artifact kind '{s}'"))
    }
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported artifact version {0}")]
    Version(u64),
    #[error("artifact kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: ArtifactKind, found: ArtifactKind },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryParams {
    pub columns: Vec<String>,
    pub max_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamiliarityData {
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamiliarityParams {
    pub components: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionData {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub explained_variance: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub method: ProjectionMethod,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelColumns {
    pub label: String,
    pub pred: String,
    /// Number of ids the analysis was restricted to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisArtifact {
    Summary {
        params: SummaryParams,
        data: Vec<DistributionSummary>,
    },
    Duplicates {
        data: DuplicateGroups,
    },
    Familiarity {
        params: FamiliarityParams,
        data: FamiliarityData,
    },
    Projection {
        params: ProjectionParams,
        data: ProjectionData,
    },
    Confusion {
        params: ModelColumns,
        data: ConfusionMatrix,
    },
    Hierarchy {
        params: ModelColumns,
        data: HierarchicalConfusion,
    },
    Subgroups {
        params: ModelColumns,
        data: SubgroupReport,
    },
}

impl AnalysisArtifact {
    pub fn familiarity(table: &MetadataTable, model: &GmmModel, scores: FamiliarityScores, params: FamiliarityParams) -> Self {
        AnalysisArtifact::Familiarity {
            params,
            data: FamiliarityData {
                ids: table.ids().to_vec(),
                scores: scores.scores,
                converged: model.converged,
                final_log_likelihood: model.final_log_likelihood,
                weights: model.weights.clone(),
            },
        }
    }

    pub fn projection(table: &MetadataTable, p: Projection2D) -> Self {
        AnalysisArtifact::Projection {
            params: ProjectionParams {
                method: p.method,
                seed: p.seed,
            },
            data: ProjectionData {
                ids: table.ids().to_vec(),
                coords: p.coords,
                explained_variance: p.explained_variance,
            },
        }
    }

    pub fn kind(&self) -> ArtifactKind {
        match self {
            AnalysisArtifact::Summary { .. } => ArtifactKind::Summary,
            AnalysisArtifact::Duplicates { .. } => ArtifactKind::Duplicates,
            AnalysisArtifact::Familiarity { .. } => ArtifactKind::Familiarity,
            AnalysisArtifact::Projection { .. } => ArtifactKind::Projection,
            AnalysisArtifact::Confusion { .. } => ArtifactKind::Confusion,
            AnalysisArtifact::Hierarchy { .. } => ArtifactKind::Hierarchy,
            AnalysisArtifact::Subgroups { .. } => ArtifactKind::Subgroups,
        }
    }

    /// Row ids the artifact refers to.
    pub fn referenced_ids(&self) -> Vec<&str> {
        match self {
            AnalysisArtifact::Duplicates { data } => data.groups.iter().flatten().map(String::as_str).collect(),
            AnalysisArtifact::Familiarity { data, .. } => data.ids.iter().map(String::as_str).collect(),
            AnalysisArtifact::Projection { data, .. } => data.ids.iter().map(String::as_str).collect(),
            _ => Vec::new(),
        }
    }

    /// Columns the artifact refers to.
    pub fn referenced_columns(&self) -> Vec<&str> {
        match self {
            AnalysisArtifact::Summary { params, .. } => params.columns.iter().map(String::as_str).collect(),
            AnalysisArtifact::Confusion { params, .. } | AnalysisArtifact::Hierarchy { params, .. } => {
                vec![params.label.as_str(), params.pred.as_str()]
            }
            AnalysisArtifact::Subgroups { params, data } => {
                let mut v = vec![params.label.as_str(), params.pred.as_str()];
                v.extend(data.features.iter().map(String::as_str));
                v
            }
            _ => Vec::new(),
        }
    }

    fn parts(&self) -> (Value, Value) {
        fn v<T: Serialize>(x: &T) -> Value {
            serde_json::to_value(x).expect("artifact serializes")
        }
        match self {
            AnalysisArtifact::Summary { params, data } => (v(params), v(data)),
            AnalysisArtifact::Duplicates { data } => (v(&data.params), v(data)),
            AnalysisArtifact::Familiarity { params, data } => (v(params), v(data)),
            AnalysisArtifact::Projection { params, data } => (v(params), v(data)),
            AnalysisArtifact::Confusion { params, data } => (v(params), v(data)),
            AnalysisArtifact::Hierarchy { params, data } => (v(params), v(data)),
            AnalysisArtifact::Subgroups { params, data } => (v(params), v(data)),
        }
    }

    pub fn to_value(&self) -> Value {
        let (params, data) = self.parts();
        let mut doc = serde_json::json!({
            "kind": self.kind(),
            "version": ARTIFACT_VERSION,
            "params": params,
            "data": data,
        });
        round_numbers(&mut doc);
        doc
    }

    /// File contents: minified, sorted keys, trailing newline.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.to_value()).expect("json value serializes");
        out.push(b'\n');
        out
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, ArtifactError> {
        #[derive(Deserialize)]
        struct Raw {
            kind: ArtifactKind,
            version: u64,
            params: Value,
            data: Value,
        }
        let raw: Raw = serde_json::from_slice(bytes)?;
        if raw.version != ARTIFACT_VERSION as u64 {
            return Err(ArtifactError::Version(raw.version));
        }
        let p = raw.params;
        let d = raw.data;
        use serde_json::from_value as fv;
        Ok(match raw.kind {
            ArtifactKind::Summary => AnalysisArtifact::Summary {
                params: fv(p)?,
                data: fv(d)?,
            },
            ArtifactKind::Duplicates => AnalysisArtifact::Duplicates { data: fv(d)? },
            ArtifactKind::Familiarity => AnalysisArtifact::Familiarity {
                params: fv(p)?,
                data: fv(d)?,
            },
            ArtifactKind::Projection => AnalysisArtifact::Projection {
                params: fv(p)?,
                data: fv(d)?,
            },
            ArtifactKind::Confusion => AnalysisArtifact::Confusion {
                params: fv(p)?,
                data: fv(d)?,
            },
            ArtifactKind::Hierarchy => AnalysisArtifact::Hierarchy {
                params: fv(p)?,
                data: fv(d)?,
            },
            ArtifactKind::Subgroups => AnalysisArtifact::Subgroups {
                params: fv(p)?,
                data: fv(d)?,
            },
        })
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf, ArtifactError> {
        let path = dir.join(self.kind().file_name());
        std::fs::create_dir_all(dir).map_err(|source| ArtifactError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        std::fs::write(&path, self.to_bytes()).map_err(|source| ArtifactError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// Artifacts keyed by kind, at most one per kind.
pub type ArtifactSet = BTreeMap<ArtifactKind, AnalysisArtifact>;

/// Loads every `<kind>.v1` file in `dir`. Other files are ignored.
pub fn load_artifact_dir(dir: &Path) -> Result<ArtifactSet, ArtifactError> {
    let mut set = ArtifactSet::new();
    for kind in ArtifactKind::ALL {
        let path = dir.join(kind.file_name());
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(source) => return Err(ArtifactError::Io { path, source }),
        };
        let artifact = AnalysisArtifact::from_slice(&bytes)?;
        if artifact.kind() != kind {
            return Err(ArtifactError::KindMismatch {
                expected: kind,
                found: artifact.kind(),
            });
        }
        set.insert(kind, artifact);
    }
    Ok(set)
}

/// Rounds a finite float to nine significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Rounds every non-integer number in `value` to nine significant digits.
pub fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig9).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}
