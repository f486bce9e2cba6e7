//! Local HTTP service for live exploration.
//!
//! ```text
//! GET  /api/spec
//! GET  /api/schema
//! GET  /api/view?state=<token>
//! GET  /api/table?state=<token>&page=<n>
//! GET  /api/artifact/<kind>
//! GET  /api/state
//! PUT  /api/state            body: raw state token
//! GET  /instances/<id>
//! ```
//!
//! Requests without a `state` parameter use the server's current state.

use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Body;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Deserialize;
use thiserror::Error;

use crate::artifact::{load_artifact_dir, ArtifactError, ArtifactKind};
use crate::bundle::{
    build_spec, ComponentConfig, ComponentInstance, DashboardSpec, PageAssignment, SpecInput, ValidationErrors,
};
use crate::payload::{resolve_state, table_page};
use crate::state::{derive_view, AnalysisState, StateDoc, StateError, StateToken};
use crate::table::{load_table, EmbeddingMatrix, InstanceRef, KindHints, MetadataTable, TableError};

const VIEW_CACHE_LIMIT: usize = 256;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub port: u16,
    pub bind: IpAddr,
    pub table: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub instance_base_uri: Option<String>,
    pub artifact_dir: Option<PathBuf>,
    /// Dashboard spec (built or authoring form). A single list page is used
    /// when absent.
    pub spec: Option<PathBuf>,
    pub read_only: bool,
}

impl ServerConfig {
    pub fn new(table: impl Into<PathBuf>, port: u16) -> Self {
        Self {
            port,
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            table: table.into(),
            embeddings: None,
            instance_base_uri: None,
            artifact_dir: None,
            spec: None,
            read_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let mut problems = Vec::new();
        if self.port < 1024 {
            problems.push(format!("port {} is outside 1024-65535", self.port));
        }
        let paths = [Some(&self.table), self.embeddings.as_ref(), self.artifact_dir.as_ref(), self.spec.as_ref()];
        for p in paths.into_iter().flatten() {
            if !p.exists() {
                problems.push(format!("{} does not exist", p.display()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ServiceError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Spec(#[from] ValidationErrors),
    #[error("spec {path}: {reason}")]
    SpecFile { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything the handlers read. The table and artifacts never change; the
/// current state is replaced wholesale by `PUT /api/state`.
pub struct AppState {
    table: MetadataTable,
    spec: DashboardSpec,
    spec_json: Vec<u8>,
    schema_json: String,
    artifacts: HashMap<ArtifactKind, Vec<u8>>,
    current: RwLock<StateToken>,
    read_only: bool,
    view_cache: Mutex<HashMap<String, String>>,
}

impl AppState {
    pub fn new(table: MetadataTable, spec: DashboardSpec, artifacts: HashMap<ArtifactKind, Vec<u8>>, read_only: bool) -> Self {
        let spec_json = spec.to_bytes();
        let schema_json = serde_json::to_string(table.schema()).expect("schema serializes");
        let current = StateToken::from_doc(&spec.initial_state);
        Self {
            table,
            spec,
            spec_json,
            schema_json,
            artifacts,
            current: RwLock::new(current),
            read_only,
            view_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn load(config: &ServerConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let table = load_table(&config.table, &KindHints::new())?;
        if let Some(path) = &config.embeddings {
            let (emb, meta) = EmbeddingMatrix::load(path)?;
            emb.check_alignment(&table, Some(&meta))?;
        }
        let mut spec = match &config.spec {
            Some(path) => read_spec(path, &table)?,
            None => default_spec(&config.table, &table)?,
        };
        if config.instance_base_uri.is_some() {
            spec.instance_base_uri = config.instance_base_uri.clone();
        }
        let artifacts = match &config.artifact_dir {
            Some(dir) => load_artifact_dir(dir)?
                .into_iter()
                .map(|(k, a)| (k, a.to_bytes()))
                .collect(),
            None => HashMap::new(),
        };
        Ok(Self::new(table, spec, artifacts, config.read_only))
    }

    pub fn spec(&self) -> &DashboardSpec {
        &self.spec
    }

    pub fn current_token(&self) -> StateToken {
        self.current.read().expect("state lock").clone()
    }

    fn state_for(&self, token: Option<&str>) -> Result<(String, AnalysisState), StateError> {
        let token = match token {
            Some(t) if !t.is_empty() => t.to_string(),
            _ => self.current_token().as_str().to_string(),
        };
        let state = resolve_state(Some(&token), &StateDoc::default(), self.table.schema())?;
        Ok((token, state))
    }

    pub fn view_json(&self, token: Option<&str>) -> Result<String, StateError> {
        let (token, state) = self.state_for(token)?;
        if let Some(hit) = self.view_cache.lock().expect("cache lock").get(&token) {
            return Ok(hit.clone());
        }
        let json = derive_view(&self.table, &state)?.to_json();
        let mut cache = self.view_cache.lock().expect("cache lock");
        if cache.len() >= VIEW_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(token, json.clone());
        Ok(json)
    }

    pub fn table_page_json(&self, token: Option<&str>, page: Option<usize>) -> Result<String, StateError> {
        let (_, state) = self.state_for(token)?;
        Ok(table_page(
            &self.table,
            &state,
            page,
            self.spec.instance_base_uri.as_deref(),
            self.spec.instance_column.as_deref(),
        )?
        .to_json())
    }

    /// Replaces the current state after validating the token.
    pub fn put_state(&self, token: &str) -> Result<StateToken, StateError> {
        let token = StateToken::from_raw(token.trim());
        let state = crate::state::decode_state(&token, self.table.schema())?;
        let canonical = crate::state::encode_state(&state);
        *self.current.write().expect("state lock") = canonical.clone();
        Ok(canonical)
    }
}

fn read_spec(path: &Path, table: &MetadataTable) -> Result<DashboardSpec, ServiceError> {
    let bytes = std::fs::read(path)?;
    if let Ok(spec) = serde_json::from_slice::<DashboardSpec>(&bytes) {
        if &spec.schema != table.schema() {
            return Err(ServiceError::SpecFile {
                path: path.to_path_buf(),
                reason: "spec schema does not match the table".into(),
            });
        }
        return Ok(spec);
    }
    let input: SpecInput = serde_json::from_slice(&bytes).map_err(|e| ServiceError::SpecFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(build_spec(&input, table.schema())?)
}

fn default_spec(table_path: &Path, table: &MetadataTable) -> Result<DashboardSpec, ServiceError> {
    let title = table_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into());
    let input = SpecInput {
        title,
        components: vec![ComponentInstance::new(ComponentConfig::List { columns: vec![] })],
        pages: vec![PageAssignment {
            name: "table".into(),
            components: vec![0],
        }],
        initial_state: StateDoc::default(),
        instance_base_uri: None,
        instance_column: None,
    };
    Ok(build_spec(&input, table.schema())?)
}

fn json_response(status: StatusCode, body: impl Into<Body>) -> Response {
    let mut resp = Response::new(body.into());
    *resp.status_mut() = status;
    resp.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json; charset=utf-8"),
    );
    resp
}

fn error_response(status: StatusCode, error: &str, message: String, fields: Option<serde_json::Value>) -> Response {
    let mut body = serde_json::json!({ "error": error, "message": message });
    if let Some(f) = fields {
        body["fields"] = f;
    }
    json_response(status, body.to_string())
}

fn state_error(e: StateError) -> Response {
    match &e {
        StateError::MalformedToken(_) => error_response(StatusCode::BAD_REQUEST, "MalformedToken", e.to_string(), None),
        StateError::InvalidState(fields) => error_response(
            StatusCode::BAD_REQUEST,
            "InvalidState",
            e.to_string(),
            Some(serde_json::to_value(fields).expect("field errors serialize")),
        ),
    }
}

#[derive(Debug, Deserialize)]
struct StateQuery {
    state: Option<String>,
    page: Option<usize>,
}

type Shared = Arc<AppState>;

async fn get_spec(State(app): State<Shared>) -> Response {
    json_response(StatusCode::OK, app.spec_json.clone())
}

async fn get_schema(State(app): State<Shared>) -> Response {
    json_response(StatusCode::OK, app.schema_json.clone())
}

async fn get_view(State(app): State<Shared>, Query(q): Query<StateQuery>) -> Response {
    match app.view_json(q.state.as_deref()) {
        Ok(json) => json_response(StatusCode::OK, json),
        Err(e) => state_error(e),
    }
}

async fn get_table(State(app): State<Shared>, Query(q): Query<StateQuery>) -> Response {
    match app.table_page_json(q.state.as_deref(), q.page) {
        Ok(json) => json_response(StatusCode::OK, json),
        Err(e) => state_error(e),
    }
}

async fn get_artifact(State(app): State<Shared>, UrlPath(kind): UrlPath<String>) -> Response {
    let Ok(kind) = kind.parse::<ArtifactKind>() else {
        return error_response(StatusCode::NOT_FOUND, "UnknownKind", format!("unknown artifact kind '{kind}'"), None);
    };
    match app.artifacts.get(&kind) {
        Some(bytes) => json_response(StatusCode::OK, bytes.clone()),
        None => error_response(
            StatusCode::NOT_FOUND,
            "MissingArtifact",
            format!("no {kind} artifact was loaded"),
            None,
        ),
    }
}

fn state_body(token: &StateToken) -> String {
    let doc = token.to_doc().expect("stored tokens are valid");
    serde_json::json!({ "token": token.as_str(), "state": doc }).to_string()
}

async fn get_state(State(app): State<Shared>) -> Response {
    json_response(StatusCode::OK, state_body(&app.current_token()))
}

async fn put_state(State(app): State<Shared>, body: String) -> Response {
    if app.read_only {
        return error_response(StatusCode::FORBIDDEN, "ReadOnly", "server is read-only".into(), None);
    }
    match app.put_state(&body) {
        Ok(token) => json_response(StatusCode::OK, state_body(&token)),
        Err(e) => state_error(e),
    }
}

fn is_local(base: &str) -> Option<PathBuf> {
    if let Some(rest) = base.strip_prefix("file://") {
        return Some(PathBuf::from(rest));
    }
    (!base.contains("://")).then(|| PathBuf::from(base))
}

async fn get_instance(State(app): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(row) = app.table.ids().iter().position(|i| *i == id) else {
        return error_response(StatusCode::NOT_FOUND, "UnknownId", format!("id '{id}' is not in the table"), None);
    };
    let Some(base) = app.spec.instance_base_uri.as_deref() else {
        return error_response(
            StatusCode::NOT_FOUND,
            "NoInstanceBase",
            "no instance_base_uri configured".into(),
            None,
        );
    };
    let r = InstanceRef::resolve(&app.table, row, base, app.spec.instance_column.as_deref());
    match is_local(&r.uri) {
        Some(path) => match tokio::fs::read(&path).await {
            Ok(bytes) => {
                let mut resp = Response::new(Body::from(bytes));
                resp.headers_mut().insert(
                    header::CONTENT_TYPE,
                    HeaderValue::from_static(r.media_kind.content_type(&r.uri)),
                );
                resp
            }
            Err(e) => error_response(StatusCode::NOT_FOUND, "InstanceUnavailable", e.to_string(), None),
        },
        None => match HeaderValue::from_str(&r.uri) {
            Ok(loc) => (StatusCode::TEMPORARY_REDIRECT, [(header::LOCATION, loc)]).into_response(),
            Err(_) => error_response(StatusCode::BAD_GATEWAY, "BadInstanceUri", r.uri, None),
        },
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/spec", get(get_spec))
        .route("/api/schema", get(get_schema))
        .route("/api/view", get(get_view))
        .route("/api/table", get(get_table))
        .route("/api/artifact/{kind}", get(get_artifact))
        .route("/api/state", get(get_state).put(put_state))
        .route("/instances/{id}", get(get_instance))
        .with_state(app)
}

/// Binds the configured port. Fails with [`ServiceError::PortInUse`] when
/// another process holds it.
pub async fn bind(config: &ServerConfig) -> Result<tokio::net::TcpListener, ServiceError> {
    let addr = SocketAddr::new(config.bind, config.port);
    tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            ServiceError::PortInUse(config.port)
        } else {
            ServiceError::Io(e)
        }
    })
}

/// Loads inputs and serves until ctrl-c.
pub async fn serve(config: ServerConfig) -> Result<(), ServiceError> {
    let app = Arc::new(AppState::load(&config)?);
    let listener = bind(&config).await?;
    log::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
