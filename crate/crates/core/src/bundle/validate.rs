use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::export::sha256_hex;
use super::{
    BundleManifest, DashboardSpec, ARTIFACT_DIR, MANIFEST_FILE, MANIFEST_VERSION, SPEC_FILE, SPEC_VERSION, STATE_FILE,
    TABLE_FILE,
};
use crate::artifact::{AnalysisArtifact, ArtifactKind};
use crate::state::{AnalysisState, StateToken};
use crate::table::ingest_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    ManifestMissing,
    ManifestInvalid,
    UnsupportedVersion,
    MissingFile,
    SizeMismatch,
    HashMismatch,
    UnlistedFile,
    SpecInvalid,
    TableInvalid,
    SchemaMismatch,
    StateInvalid,
    ArtifactInvalid,
    MissingArtifact,
    UnknownId,
    UnknownColumn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.path {
            Some(p) => write!(f, "{sev}: {p}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BundleReport {
    pub findings: Vec<Finding>,
}

impl BundleReport {
    pub fn is_ok(&self) -> bool {
        self.findings.iter().all(|f| f.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    fn push(&mut self, severity: Severity, code: FindingCode, path: Option<&str>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity,
            code,
            path: path.map(str::to_string),
            message: message.into(),
        });
    }

    fn error(&mut self, code: FindingCode, path: &str, message: impl Into<String>) {
        self.push(Severity::Error, code, Some(path), message);
    }
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            list_files(root, &path, out);
        } else if let Ok(rel) = path.strip_prefix(root) {
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(parts.join("/"));
        }
    }
}

/// Checks a bundle directory. Never fails; problems are returned as findings.
pub fn validate_bundle(dir: &Path) -> BundleReport {
    let mut report = BundleReport::default();

    let manifest_bytes = match std::fs::read(dir.join(MANIFEST_FILE)) {
        Ok(b) => b,
        Err(e) => {
            report.error(FindingCode::ManifestMissing, MANIFEST_FILE, e.to_string());
            return report;
        }
    };
    let manifest: BundleManifest = match serde_json::from_slice(&manifest_bytes) {
        Ok(m) => m,
        Err(e) => {
            report.error(FindingCode::ManifestInvalid, MANIFEST_FILE, e.to_string());
            return report;
        }
    };
    if manifest.version != MANIFEST_VERSION || manifest.spec_version != SPEC_VERSION {
        report.error(
            FindingCode::UnsupportedVersion,
            MANIFEST_FILE,
            format!(
                "manifest version {} / spec version {} not supported",
                manifest.version, manifest.spec_version
            ),
        );
        return report;
    }

    let mut intact = HashSet::new();
    for entry in &manifest.files {
        match std::fs::read(dir.join(&entry.path)) {
            Err(_) => report.error(FindingCode::MissingFile, &entry.path, "listed in manifest but missing"),
            Ok(bytes) => {
                if bytes.len() as u64 != entry.size {
                    report.error(
                        FindingCode::SizeMismatch,
                        &entry.path,
                        format!("size {} differs from manifest size {}", bytes.len(), entry.size),
                    );
                }
                if sha256_hex(&bytes) != entry.sha256 {
                    report.error(FindingCode::HashMismatch, &entry.path, "sha256 does not match manifest");
                } else {
                    intact.insert(entry.path.as_str());
                }
            }
        }
    }
    let listed: BTreeSet<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    let mut present = Vec::new();
    list_files(dir, dir, &mut present);
    present.sort();
    for p in present {
        if p != MANIFEST_FILE && !listed.contains(p.as_str()) {
            report.push(Severity::Warning, FindingCode::UnlistedFile, Some(&p), "not listed in manifest");
        }
    }
    for required in [SPEC_FILE, TABLE_FILE, STATE_FILE] {
        if !listed.contains(required) {
            report.error(FindingCode::MissingFile, required, "required file not listed in manifest");
        }
    }

    // Content checks only on files whose bytes verified.
    if !intact.contains(SPEC_FILE) {
        return report;
    }
    let spec: DashboardSpec = match std::fs::read(dir.join(SPEC_FILE))
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => {
            report.error(FindingCode::SpecInvalid, SPEC_FILE, e);
            return report;
        }
    };
    if spec.version != SPEC_VERSION {
        report.error(
            FindingCode::UnsupportedVersion,
            SPEC_FILE,
            format!("spec version {} not supported", spec.version),
        );
        return report;
    }

    let table = if intact.contains(TABLE_FILE) {
        let hints = spec.schema.columns().iter().map(|c| (c.name.clone(), c.kind)).collect();
        match std::fs::File::open(dir.join(TABLE_FILE))
            .map_err(|e| e.to_string())
            .and_then(|f| ingest_table(std::io::BufReader::new(f), &hints).map_err(|e| e.to_string()))
        {
            Ok(t) => {
                if t.schema() != &spec.schema {
                    report.error(FindingCode::SchemaMismatch, TABLE_FILE, "table schema differs from spec schema");
                }
                Some(t)
            }
            Err(e) => {
                report.error(FindingCode::TableInvalid, TABLE_FILE, e);
                None
            }
        }
    } else {
        None
    };

    if intact.contains(STATE_FILE) {
        let token = std::fs::read_to_string(dir.join(STATE_FILE)).unwrap_or_default();
        let check = StateToken::from_raw(token.trim())
            .to_doc()
            .and_then(|doc| AnalysisState::from_doc(&doc, &spec.schema));
        if let Err(e) = check {
            report.error(FindingCode::StateInvalid, STATE_FILE, e.to_string());
        }
    }

    let ids: Option<HashSet<&str>> = table.as_ref().map(|t| t.ids().iter().map(String::as_str).collect());
    let mut loaded = BTreeSet::new();
    for kind in ArtifactKind::ALL {
        let rel = format!("{ARTIFACT_DIR}/{}", kind.file_name());
        if !listed.contains(rel.as_str()) {
            continue;
        }
        loaded.insert(kind);
        if !intact.contains(rel.as_str()) {
            continue;
        }
        let artifact = match std::fs::read(dir.join(&rel))
            .map_err(|e| e.to_string())
            .and_then(|b| AnalysisArtifact::from_slice(&b).map_err(|e| e.to_string()))
        {
            Ok(a) => a,
            Err(e) => {
                report.error(FindingCode::ArtifactInvalid, &rel, e);
                continue;
            }
        };
        if artifact.kind() != kind {
            report.error(
                FindingCode::ArtifactInvalid,
                &rel,
                format!("file holds a {} artifact", artifact.kind()),
            );
            continue;
        }
        for col in artifact.referenced_columns() {
            if spec.schema.get(col).is_none() {
                report.error(FindingCode::UnknownColumn, &rel, format!("column '{col}' is not in the table"));
            }
        }
        if let Some(ids) = &ids {
            let unknown: Vec<&str> = artifact.referenced_ids().into_iter().filter(|id| !ids.contains(id)).collect();
            if let Some(first) = unknown.first() {
                report.error(
                    FindingCode::UnknownId,
                    &rel,
                    format!("{} ids not in the table (first: '{first}')", unknown.len()),
                );
            }
        }
    }
    for kind in spec.required_artifacts() {
        if !loaded.contains(&kind) {
            report.push(
                Severity::Error,
                FindingCode::MissingArtifact,
                Some(SPEC_FILE),
                format!("a component needs the {kind} artifact, which the bundle lacks"),
            );
        }
    }
    report
}
