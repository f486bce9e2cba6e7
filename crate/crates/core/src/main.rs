use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlscope::analytics::{
    default_components, familiarity_scores, find_duplicates, fit_gmm, project_2d, AnalyticsError, GmmConfig,
    ProjectionMethod,
};
use mlscope::artifact::{
    load_artifact_dir, AnalysisArtifact, ArtifactError, ArtifactKind, FamiliarityParams, ModelColumns, SummaryParams,
};
use mlscope::bundle::{build_spec, export_bundle, validate_bundle, BundleError, DashboardSpec, SpecInput};
use mlscope::model::{
    confusion_matrix, hierarchical_confusion, subgroup_metrics, LabelHierarchy, MetricRegistry, ModelError,
    SubgroupParams,
};
use mlscope::service::{serve, ServerConfig, ServiceError};
use mlscope::state::{Filter, MAX_PAGE_SIZE};
use mlscope::table::{
    column_summary, load_table, write_schema_sidecar, ColumnKind, EmbeddingMatrix, KindHints, MetadataTable,
    TableError,
};

#[derive(Parser)]
#[command(name = "mlscope", version, about = "Dataset and model analysis engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a CSV table (and embeddings) and record the inferred schema.
    Ingest(IngestArgs),
    /// Run analyses and write one artifact file per kind.
    Analyze(AnalyzeArgs),
    /// Export a static dashboard bundle.
    Export(ExportArgs),
    /// Serve the HTTP API for live exploration.
    Serve(ServeArgs),
    /// Check a bundle directory.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Source CSV with a header row.
    #[arg(long)]
    table: PathBuf,
    /// Column kind override, NAME=KIND (id, categorical, numeric, text, label, prediction).
    #[arg(long = "kind", value_name = "NAME=KIND")]
    kinds: Vec<String>,
    /// Embeddings: a CSV of numbers (one row per table row, no header) or raw
    /// little-endian f32 (needs --dim).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    table: PathBuf,
    /// Embedding file written by `ingest` (raw f32 with a .meta sidecar).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Analyses to run: summary, duplicates, familiarity, projection, confusion, hierarchy, subgroups.
    #[arg(long = "kind", required = true)]
    kinds: Vec<ArtifactKind>,
    /// Artifact output directory.
    #[arg(long)]
    out: PathBuf,
    /// Summary columns (default: every non-id column).
    #[arg(long = "column")]
    columns: Vec<String>,
    #[arg(long, default_value_t = 10)]
    max_bins: usize,
    /// Neighbours per row for duplicate search.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Cosine-distance threshold for duplicates.
    #[arg(long, default_value_t = 0.03)]
    tau: f64,
    /// Mixture components (default 8, fewer for tiny data).
    #[arg(long = "components", short = 'K')]
    components: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Projection method: pca or neighbor_embed.
    #[arg(long, default_value = "pca")]
    method: ProjectionMethod,
    /// Label column (default: the schema's label column).
    #[arg(long)]
    label: Option<String>,
    /// Prediction column (default: the schema's prediction column).
    #[arg(long)]
    pred: Option<String>,
    /// Label hierarchy (indented outline or JSON) for the hierarchy analysis.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Subgroup feature column.
    #[arg(long = "feature")]
    features: Vec<String>,
    #[arg(long)]
    positive_class: Option<String>,
    #[arg(long, default_value_t = 10)]
    min_size: usize,
    /// Restrict model analyses to rows matching this filter.
    #[arg(long)]
    filter: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    /// Dashboard spec JSON (authoring or built form).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    table: PathBuf,
    /// Directory holding artifact files from `analyze`.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Manifest timestamp (unix seconds). Defaults to SOURCE_DATE_EPOCH, then the current time.
    #[arg(long)]
    timestamp: Option<u64>,
    /// Page size of the baked-in state.
    #[arg(long)]
    page_size: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    instance_base_uri: Option<String>,
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    read_only: bool,
}

#[derive(Args)]
struct ValidateArgs {
    dir: PathBuf,
}

/// Exit 2 for bad input, 1 for everything else.
enum CliError {
    Validation(String),
    Internal(String),
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Io { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io { .. } => CliError::Internal(format!("IoError: {e}")),
            BundleError::Artifact(a) => a.into(),
            BundleError::Table(t) => t.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(_) | ServiceError::PortInUse(_) => CliError::Internal(e.to_string()),
            ServiceError::Table(t) => t.into(),
            ServiceError::Artifact(a) => a.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("IoError: {}: {e}", path.display()))
}

fn parse_kind_hints(specs: &[String]) -> Result<KindHints, CliError> {
    let mut hints = KindHints::new();
    for s in specs {
        let (name, kind) = s
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--kind expects NAME=KIND, got '{s}'")))?;
        let kind: ColumnKind = kind
            .parse()
            .map_err(|e| CliError::Validation(format!("--kind {s}: {e}")))?;
        hints.insert(name.to_string(), kind);
    }
    Ok(hints)
}

fn read_embedding_csv(path: &Path) -> Result<EmbeddingMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f32>())
            .collect::<Result<Vec<f32>, _>>()
            .map_err(|e| CliError::Validation(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(EmbeddingMatrix::from_rows(&rows)?)
}

fn cmd_ingest(args: IngestArgs) -> Result<(), CliError> {
    let hints = parse_kind_hints(&args.kinds)?;
    let file = std::fs::File::open(&args.table).map_err(io(&args.table))?;
    let table = mlscope::table::ingest_table(std::io::BufReader::new(file), &hints)?;
    std::fs::create_dir_all(&args.out).map_err(io(&args.out))?;
    let stem = args
        .table
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into());
    let out_table = args.out.join(format!("{stem}.csv"));
    std::fs::write(&out_table, table.to_csv()?).map_err(io(&out_table))?;
    let schema_path = write_schema_sidecar(&out_table, table.schema())?;
    println!("table: {} ({} rows, {} columns)", out_table.display(), table.row_count(), table.schema().len());
    println!("schema: {}", schema_path.display());
    for c in table.schema().columns() {
        println!("  {} {}", c.name, c.kind);
    }

    if let Some(src) = &args.embeddings {
        let is_csv = src
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("txt"));
        let emb = if is_csv {
            read_embedding_csv(src)?
        } else {
            let d = args
                .dim
                .ok_or_else(|| CliError::Validation("raw f32 embeddings need --dim".into()))?;
            let bytes = std::fs::metadata(src).map_err(io(src))?.len() as usize;
            let n = bytes / (4 * d.max(1));
            let file = std::fs::File::open(src).map_err(io(src))?;
            EmbeddingMatrix::read_from(std::io::BufReader::new(file), n, d)?
        };
        emb.check_alignment(&table, None)?;
        let out_emb = args.out.join(format!("{stem}.emb"));
        emb.save(&out_emb, table.ids())?;
        println!("embeddings: {} ({} x {})", out_emb.display(), emb.n(), emb.d());
    }
    Ok(())
}

fn load_embeddings(args: &AnalyzeArgs, table: &MetadataTable, kind: ArtifactKind) -> Result<EmbeddingMatrix, CliError> {
    let path = args.embeddings.as_ref().ok_or_else(|| {
        CliError::Validation(format!("--kind {kind} needs embeddings: pass --embeddings <file>"))
    })?;
    let (emb, meta) = EmbeddingMatrix::load(path)?;
    emb.check_alignment(table, Some(&meta))?;
    Ok(emb)
}

fn model_column(explicit: &Option<String>, table: &MetadataTable, kind: ColumnKind, flag: &str) -> Result<String, CliError> {
    if let Some(c) = explicit {
        return Ok(c.clone());
    }
    table
        .schema()
        .first_of_kind(kind)
        .map(|c| c.name.clone())
        .ok_or_else(|| CliError::Validation(format!("no {kind} column in the schema: pass --{flag}")))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let table = load_table(&args.table, &KindHints::new())?;
    let subset: Option<Vec<String>> = match &args.filter {
        Some(text) => {
            let f = Filter::parse(text, table.schema()).map_err(|e| CliError::Validation(format!("--filter: {e}")))?;
            let mask = f.evaluate(&table).map_err(|e| CliError::Validation(format!("--filter: {e}")))?;
            Some(
                mask.iter()
                    .zip(table.ids())
                    .filter(|(m, _)| **m)
                    .map(|(_, id)| id.clone())
                    .collect(),
            )
        }
        None => None,
    };
    let subset_size = subset.as_ref().map(Vec::len);
    let mut emb_cache: Option<EmbeddingMatrix> = None;
    let mut seen = HashSet::new();
    let mut written = Vec::new();

    for &kind in &args.kinds {
        if !seen.insert(kind) {
            continue;
        }
        if kind.needs_embeddings() && emb_cache.is_none() {
            emb_cache = Some(load_embeddings(&args, &table, kind)?);
        }
        let artifact = match kind {
            ArtifactKind::Summary => {
                let columns: Vec<String> = if args.columns.is_empty() {
                    table
                        .schema()
                        .columns()
                        .iter()
                        .filter(|c| c.kind != ColumnKind::Id)
                        .map(|c| c.name.clone())
                        .collect()
                } else {
                    args.columns.clone()
                };
                let data = columns
                    .iter()
                    .map(|c| column_summary(&table, c, args.max_bins))
                    .collect::<Result<Vec<_>, _>>()?;
                AnalysisArtifact::Summary {
                    params: SummaryParams {
                        columns,
                        max_bins: args.max_bins,
                    },
                    data,
                }
            }
            ArtifactKind::Duplicates => {
                let emb = emb_cache.as_ref().expect("loaded above");
                AnalysisArtifact::Duplicates {
                    data: find_duplicates(emb, table.ids(), args.k, args.tau)?,
                }
            }
            ArtifactKind::Familiarity => {
                let emb = emb_cache.as_ref().expect("loaded above");
                let config = GmmConfig {
                    components: args.components.unwrap_or_else(|| default_components(emb.n())),
                    seed: args.seed,
                    max_iter: args.max_iter,
                    ..GmmConfig::default()
                };
                let model = fit_gmm(emb, config)?;
                let scores = familiarity_scores(&model, emb)?;
                AnalysisArtifact::familiarity(
                    &table,
                    &model,
                    scores,
                    FamiliarityParams {
                        components: config.components,
                        seed: config.seed,
                        max_iter: config.max_iter,
                        tol: config.tol,
                    },
                )
            }
            ArtifactKind::Projection => {
                let emb = emb_cache.as_ref().expect("loaded above");
                AnalysisArtifact::projection(&table, project_2d(emb, args.method, args.seed)?)
            }
            ArtifactKind::Confusion | ArtifactKind::Hierarchy | ArtifactKind::Subgroups => {
                let label = model_column(&args.label, &table, ColumnKind::Label, "label")?;
                let pred = model_column(&args.pred, &table, ColumnKind::Prediction, "pred")?;
                let params = ModelColumns {
                    label: label.clone(),
                    pred: pred.clone(),
                    subset_size,
                };
                let ids = subset.as_deref();
                match kind {
                    ArtifactKind::Confusion => AnalysisArtifact::Confusion {
                        data: confusion_matrix(&table, &label, &pred, ids)?,
                        params,
                    },
                    ArtifactKind::Hierarchy => {
                        let path = args.hierarchy.as_ref().ok_or_else(|| {
                            CliError::Validation("--kind hierarchy needs a label hierarchy: pass --hierarchy <file>".into())
                        })?;
                        let text = std::fs::read_to_string(path).map_err(io(path))?;
                        let h = LabelHierarchy::parse(&text)?;
                        AnalysisArtifact::Hierarchy {
                            data: hierarchical_confusion(&table, &label, &pred, &h, ids)?,
                            params,
                        }
                    }
                    _ => {
                        if args.features.is_empty() {
                            return Err(CliError::Validation(
                                "--kind subgroups needs at least one --feature column".into(),
                            ));
                        }
                        let sp = SubgroupParams {
                            features: args.features.clone(),
                            label_col: label,
                            pred_col: pred,
                            positive_class: args.positive_class.clone(),
                            min_size: args.min_size,
                        };
                        AnalysisArtifact::Subgroups {
                            data: subgroup_metrics(&table, &sp, &MetricRegistry::new(), ids)?,
                            params,
                        }
                    }
                }
            }
        };
        let path = artifact.write_to_dir(&args.out)?;
        written.push(path);
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn read_spec(path: &Path, table: &MetadataTable) -> Result<DashboardSpec, CliError> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    if let Ok(spec) = serde_json::from_slice::<DashboardSpec>(&bytes) {
        return Ok(spec);
    }
    let input: SpecInput =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    build_spec(&input, table.schema()).map_err(|e| CliError::Validation(e.to_string()))
}

fn cmd_export(args: ExportArgs) -> Result<(), CliError> {
    let table = load_table(&args.table, &KindHints::new())?;
    let mut spec = read_spec(&args.spec, &table)?;
    if let Some(size) = args.page_size {
        if size == 0 || size > MAX_PAGE_SIZE {
            return Err(CliError::Validation(format!("--page-size must be in 1..={MAX_PAGE_SIZE}")));
        }
        spec.initial_state.page_size = size;
    }
    let artifacts = match &args.artifacts {
        Some(dir) => load_artifact_dir(dir)?,
        None => Default::default(),
    };
    let timestamp = args.timestamp.or_else(|| {
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    let manifest = export_bundle(&spec, &table, &artifacts, &args.out, timestamp)?;
    println!(
        "bundle {}: {} files, {} bytes, created_unix {}",
        args.out.display(),
        manifest.files.len(),
        manifest.total_size(),
        manifest.created_unix
    );
    for f in &manifest.files {
        println!("  {:<32} {:>10}  {}", f.path, f.size, f.sha256);
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let config = ServerConfig {
        port: args.port,
        bind: args.bind,
        table: args.table,
        embeddings: args.embeddings,
        instance_base_uri: args.instance_base_uri,
        artifact_dir: args.artifacts,
        spec: args.spec,
        read_only: args.read_only,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(serve(config))?;
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let report = validate_bundle(&args.dir);
    for f in &report.findings {
        println!("{f}");
    }
    if report.is_ok() {
        println!("ok: {}", args.dir.display());
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{} error(s) in {}",
            report.errors().count(),
            args.dir.display()
        )))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Export(a) => cmd_export(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
