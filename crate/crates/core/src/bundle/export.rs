use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use super::{
    io_err, BundleError, BundleManifest, DashboardSpec, ManifestEntry, ARTIFACT_DIR, INDEX_FILE, MANIFEST_FILE,
    MANIFEST_VERSION, SPEC_FILE, SPEC_VERSION, STATE_FILE, TABLE_FILE,
};
use crate::artifact::{ArtifactSet, ARTIFACT_EXT};
use crate::state::StateToken;
use crate::table::MetadataTable;

/// Viewer shell. Reads only paths relative to itself and refuses bundles
/// with an unknown spec version. A state token in the URL fragment replaces
/// the baked-in state.
pub const INDEX_HTML: &str = r#"<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>mlscope dashboard</title>
<style>
body { font-family: sans-serif; margin: 1.5rem; }
.page { margin-bottom: 2rem; }
.component { border: 1px solid #ccc; padding: .5rem; margin: .5rem 0; }
.component.half { display: inline-block; width: 48%; vertical-align: top; }
.error { color: #b00; }
pre { max-height: 20rem; overflow: auto; }
</style>
</head>
<body>
<div id="root">Loading...</div>
<script>
const SUPPORTED_VERSION = 1;
async function text(path) {
  const r = await fetch(path);
  if (!r.ok) throw new Error(path + ": " + r.status);
  return r.text();
}
function decodeToken(t) {
  const b = t.replace(/-/g, "+").replace(/_/g, "/");
  return JSON.parse(atob(b + "===".slice((b.length + 3) % 4)));
}
async function main() {
  const root = document.getElementById("root");
  const spec = JSON.parse(await text("spec.v1"));
  if (spec.version !== SUPPORTED_VERSION) {
    root.innerHTML = '<p class="error">Unsupported bundle version ' + spec.version +
      ' (this viewer reads version ' + SUPPORTED_VERSION + ').</p>';
    return;
  }
  const token = location.hash.length > 1 ? location.hash.slice(1) : (await text("data/state.token")).trim();
  const state = decodeToken(token);
  root.innerHTML = "";
  const h = document.createElement("h1");
  h.textContent = spec.title;
  root.appendChild(h);
  const s = document.createElement("p");
  s.textContent = "filter: " + (state.filter || "(all)") + " | group by: " + (state.group_by || "-");
  root.appendChild(s);
  for (const page of spec.pages) {
    const div = document.createElement("div");
    div.className = "page";
    const t = document.createElement("h2");
    t.textContent = page.name;
    div.appendChild(t);
    for (const c of page.components) {
      const box = document.createElement("div");
      box.className = "component " + c.width_hint;
      const title = document.createElement("h3");
      title.textContent = c.kind;
      box.appendChild(title);
      const body = document.createElement("pre");
      if (c.kind === "markdown") {
        body.textContent = c.source;
      } else if (c.kind === "list") {
        body.textContent = (await text("data/table.csv")).split("\n").slice(0, state.page_size + 1).join("\n");
      } else {
        const kind = c.kind === "hierarchical_confusion" ? "hierarchy" : c.kind;
        try {
          body.textContent = JSON.stringify(JSON.parse(await text("data/artifacts/" + kind + ".v1")).data, null, 1);
        } catch (e) {
          body.className = "error";
          body.textContent = String(e);
        }
      }
      box.appendChild(body);
      div.appendChild(box);
    }
    root.appendChild(div);
  }
}
main().catch(e => { document.getElementById("root").innerHTML = '<p class="error"></p>'; document.querySelector(".error").textContent = String(e); });
</script>
</body>
</html>
"#;

/// Writes a self-contained bundle to `out_dir`. `created_unix` pins the
/// manifest timestamp; when `None` the current time is used. Identical
/// inputs with a pinned timestamp give identical bytes.
pub fn export_bundle(
    spec: &DashboardSpec,
    table: &MetadataTable,
    artifacts: &ArtifactSet,
    out_dir: &Path,
    created_unix: Option<u64>,
) -> Result<BundleManifest, BundleError> {
    for kind in spec.required_artifacts() {
        if !artifacts.contains_key(&kind) {
            return Err(BundleError::MissingArtifact(kind));
        }
    }
    if table.schema() != &spec.schema {
        return Err(BundleError::SchemaMismatch);
    }

    let artifact_dir = out_dir.join(ARTIFACT_DIR);
    std::fs::create_dir_all(&artifact_dir).map_err(io_err(&artifact_dir))?;
    // Drop artifacts left over from an earlier export into the same place.
    for entry in std::fs::read_dir(&artifact_dir).map_err(io_err(&artifact_dir))? {
        let path = entry.map_err(io_err(&artifact_dir))?.path();
        if path.extension().is_some_and(|e| e == ARTIFACT_EXT) {
            std::fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }

    let token = StateToken::from_doc(&spec.initial_state);
    let mut files: Vec<(String, Vec<u8>)> = vec![
        (INDEX_FILE.to_string(), INDEX_HTML.as_bytes().to_vec()),
        (SPEC_FILE.to_string(), spec.to_bytes()),
        (TABLE_FILE.to_string(), table.to_csv()?),
        (STATE_FILE.to_string(), format!("{}\n", token.as_str()).into_bytes()),
    ];
    for (kind, artifact) in artifacts {
        files.push((format!("{ARTIFACT_DIR}/{}", kind.file_name()), artifact.to_bytes()));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let mut entries = Vec::with_capacity(files.len());
    for (rel, bytes) in &files {
        let path = out_dir.join(rel);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            path: rel.clone(),
            size: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }

    let manifest = BundleManifest {
        version: MANIFEST_VERSION,
        spec_version: SPEC_VERSION,
        created_unix: created_unix.unwrap_or_else(now_unix),
        files: entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_bytes()).map_err(io_err(&path))?;
    log::info!(
        "exported {} files ({} bytes) to {}",
        manifest.files.len(),
        manifest.total_size(),
        out_dir.display()
    );
    Ok(manifest)
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
