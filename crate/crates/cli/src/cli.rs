//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 remote error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fashionrec::eval::{evaluate_detections, evaluate_retrieval, parse_runs, TruthDoc};
use fashionrec::pipeline::PipelineError;
use fashionrec::providers::{DetectionDoc, FixtureSet, ImageRef, ProviderError};
use fashionrec::{recommend, CatalogStore, ProviderBundle, Taxonomy};
use serde::Serialize;

use crate::config::{ConfigError, Layer, Settings};
use crate::remote::RemoteProviders;
use crate::server::{self, AppState, Providers};
use crate::store::DataDir;

#[derive(Debug, Parser)]
#[command(
    name = "fashionrec",
    version,
    about = "Visual fashion recommendation over a label-sharded catalog"
)]
pub struct Cli {
    /// Catalog data directory
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Taxonomy JSON file (defaults to the built-in five-class taxonomy)
    #[arg(long, global = true, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// TOML config file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a newline-delimited product catalog
    Ingest { catalog: PathBuf },
    /// Match query against one cluster (or all clusters)
    Search {
        #[arg(long)]
        cluster: Option<String>,
        #[arg(long)]
        query: String,
        #[arg(short, long)]
        k: Option<usize>,
        /// Fail instead of searching all clusters when the cluster is missing
        #[arg(long)]
        no_fallback: bool,
    },
    /// Recommend products for the garments in an outfit image
    Recommend(RecommendArgs),
    /// Detection or retrieval evaluation
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the HTTP API
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, conflicts_with = "remote")]
        fixtures: Option<PathBuf>,
        /// Inference sidecar base URL
        #[arg(long)]
        remote: Option<String>,
    },
    /// Copy the catalog store to or from a snapshot directory
    #[command(subcommand)]
    Snapshot(SnapshotCommand),
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Image id (fixture mode) or label for --image-file (remote mode)
    #[arg(long, required_unless_present = "all")]
    pub image: Option<String>,
    /// Every image in the fixture set
    #[arg(long, conflicts_with_all = ["image", "remote"])]
    pub all: bool,
    #[arg(long, conflicts_with = "remote")]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub remote: Option<String>,
    /// Encoded image sent to the sidecar
    #[arg(long, requires = "remote")]
    pub image_file: Option<PathBuf>,
    #[arg(long, requires = "image_file")]
    pub width: Option<u32>,
    #[arg(long, requires = "image_file")]
    pub height: Option<u32>,
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Emit retrieval runs (NDJSON) judged against this relevance file
    /// instead of the recommendation documents
    #[arg(long, value_name = "FILE")]
    pub emit_runs: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Detection metrics and PR curve
    Detect {
        /// Detections: a JSON file, NDJSON file, or directory of per-image files
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Precision@k and MRR over a runs file
    Retrieval {
        #[arg(long)]
        runs: PathBuf,
        #[arg(short, long, default_value_t = 3)]
        k: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum SnapshotCommand {
    /// Write the current store to PATH
    Save { path: PathBuf },
    /// Replace the data directory's store with the snapshot at PATH
    Load { path: PathBuf },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Remote(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn provider_err(e: ProviderError) -> CliError {
    match e {
        ProviderError::RemoteUnavailable(_) | ProviderError::MalformedResponse(_) => CliError::Remote(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn pipeline_err(e: PipelineError) -> CliError {
    match e {
        PipelineError::Provider(p) => provider_err(p),
        PipelineError::InvalidConfig(m) => CliError::Usage(m),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)
        .map_err(std::io::Error::from)
        .and_then(|()| writeln!(out))
        .or_else(quiet_pipe)
}

/// A closed stdout (`fashionrec ... | head`) is not an error.
fn quiet_pipe(e: std::io::Error) -> Result<(), CliError> {
    match e.kind() {
        std::io::ErrorKind::BrokenPipe => Ok(()),
        _ => Err(data_err(e)),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy, CliError> {
    match path {
        Some(p) => Taxonomy::from_path(p).map_err(data_err),
        None => Ok(Taxonomy::default()),
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut flags = Layer {
        data_dir: cli.data.clone(),
        taxonomy: cli.taxonomy.clone(),
        ..Layer::default()
    };
    match &cli.command {
        Command::Search { k, no_fallback, .. } => {
            flags.top_k = *k;
            flags.fallback = no_fallback.then_some(false);
        }
        Command::Recommend(a) => {
            flags.top_k = a.k;
            flags.fixtures = a.fixtures.clone();
            flags.remote = a.remote.clone();
        }
        Command::Serve { port, fixtures, remote } => {
            flags.port = *port;
            flags.fixtures = fixtures.clone();
            flags.remote = remote.clone();
        }
        _ => {}
    }
    let settings = Settings::load(flags, cli.config.as_deref())?;
    let data = DataDir::new(&settings.data_dir);

    match cli.command {
        Command::Ingest { catalog } => {
            let file =
                std::fs::File::open(&catalog).map_err(|e| CliError::Data(format!("{}: {e}", catalog.display())))?;
            let mut store = data.open().map_err(data_err)?;
            let report = data.ingest(&mut store, BufReader::new(file)).map_err(data_err)?;
            data.checkpoint(&store, &settings.pipeline.scoring).map_err(data_err)?;
            emit(out, &report)
        }
        Command::Search { cluster, query, .. } => {
            let store = data.open().map_err(data_err)?;
            let routed = store
                .search(
                    cluster.as_deref(),
                    &settings.pipeline.scoring,
                    &query,
                    settings.pipeline.top_k,
                    settings.pipeline.fallback_all_clusters,
                )
                .map_err(|e| match e {
                    fashionrec::catalog::CatalogError::Search(_) => CliError::Usage(e.to_string()),
                    other => data_err(other),
                })?;
            let hits = routed
                .hits
                .into_iter()
                .map(|h| {
                    Ok(fashionrec::pipeline::ProductHit {
                        product: store.get(&h.doc_id).map_err(data_err)?.clone(),
                        score: h.score,
                        explanation: h.explanation,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            emit(
                out,
                &server::SearchResponse {
                    cluster: routed.cluster,
                    fallback: routed.fallback,
                    hits,
                },
            )
        }
        Command::Recommend(args) => run_recommend(args, &settings, &data, out),
        Command::Eval(EvalCommand::Detect { pred, truth, iou }) => {
            if !(iou > 0.0 && iou < 1.0) {
                return Err(CliError::Usage(format!(
                    "--iou must lie strictly between 0 and 1, got {iou}"
                )));
            }
            let preds = read_detection_docs(&pred)?;
            let truths: Vec<TruthDoc> = serde_json::from_str(&read(&truth)?).map_err(data_err)?;
            emit(out, &evaluate_detections(&preds, &truths, iou))
        }
        Command::Eval(EvalCommand::Retrieval { runs, k }) => {
            if k == 0 {
                return Err(CliError::Usage("-k must be at least 1".into()));
            }
            let runs = parse_runs(&read(&runs)?).map_err(data_err)?;
            emit(out, &evaluate_retrieval(&runs, k))
        }
        Command::Serve { .. } => run_serve(&settings, data),
        Command::Snapshot(SnapshotCommand::Save { path }) => {
            let store = data.open().map_err(data_err)?;
            store.save(&path, &settings.pipeline.scoring).map_err(data_err)?;
            emit(
                out,
                &serde_json::json!({"saved": path, "records": store.len(), "clusters": store.list_clusters()}),
            )
        }
        Command::Snapshot(SnapshotCommand::Load { path }) => {
            let (store, params) = CatalogStore::load(&path).map_err(data_err)?;
            data.replace_with(&store, &params).map_err(data_err)?;
            emit(
                out,
                &serde_json::json!({"loaded": path, "records": store.len(), "clusters": store.list_clusters()}),
            )
        }
    }
}

fn read_detection_docs(path: &Path) -> Result<Vec<DetectionDoc>, CliError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(data_err)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        return files
            .iter()
            .map(|p| serde_json::from_str(&read(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
            .collect();
    }
    let text = read(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(data_err)
    } else {
        trimmed
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(data_err))
            .collect()
    }
}

fn providers(settings: &Settings) -> Result<Option<Providers>, CliError> {
    match (&settings.fixtures, &settings.remote) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "choose either fixtures or a remote sidecar, not both".into(),
        )),
        (Some(dir), None) => Ok(Some(Providers::Fixtures(Arc::new(
            FixtureSet::from_dir(dir).map_err(data_err)?,
        )))),
        (None, Some(url)) => {
            let remote = Arc::new(RemoteProviders::new(
                url,
                settings.remote_timeout,
                settings.max_in_flight,
            ));
            let bundle =
                ProviderBundle::new(remote.clone(), remote.clone(), remote.clone(), remote).map_err(provider_err)?;
            Ok(Some(Providers::Remote(bundle)))
        }
        (None, None) => Ok(None),
    }
}

fn run_recommend(
    args: RecommendArgs,
    settings: &Settings,
    data: &DataDir,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(settings.taxonomy.as_deref())?;
    let store = data.open().map_err(data_err)?;
    let relevance: Option<BTreeMap<String, Vec<String>>> = match &args.emit_runs {
        Some(p) => Some(serde_json::from_str(&read(p)?).map_err(data_err)?),
        None => None,
    };
    let (images, bundle) = match providers(settings)? {
        None => return Err(CliError::Usage("recommend needs --fixtures or --remote".into())),
        Some(Providers::Fixtures(set)) => {
            let images: Vec<ImageRef> = if args.all {
                set.image_ids().filter_map(|id| set.image(id)).collect()
            } else {
                let id = args.image.as_deref().unwrap_or_default();
                vec![set
                    .image(id)
                    .ok_or_else(|| CliError::Data(format!("no fixture image {id:?}")))?]
            };
            (images, ProviderBundle::from_fixtures(set))
        }
        Some(Providers::Remote(bundle)) => {
            let (Some(file), Some(w), Some(h)) = (&args.image_file, args.width, args.height) else {
                return Err(CliError::Usage(
                    "remote mode needs --image-file, --width and --height".into(),
                ));
            };
            let bytes = std::fs::read(file).map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
            let id = args.image.clone().unwrap_or_else(|| "upload".into());
            let image = ImageRef::new(id, w, h).map_err(provider_err)?.with_payload(bytes);
            (vec![image], bundle)
        }
    };
    for image in &images {
        let recs = recommend(image, &bundle, &taxonomy, &store, &settings.pipeline).map_err(pipeline_err)?;
        match &relevance {
            Some(rel) => {
                for run in recs.retrieval_runs(rel) {
                    serde_json::to_writer(&mut *out, &run)
                        .map_err(std::io::Error::from)
                        .and_then(|()| writeln!(out))
                        .or_else(quiet_pipe)?;
                }
            }
            None => emit(out, &recs)?,
        }
    }
    Ok(())
}

fn run_serve(settings: &Settings, data: DataDir) -> Result<(), CliError> {
    let taxonomy = load_taxonomy(settings.taxonomy.as_deref())?;
    let store = data.open().map_err(data_err)?;
    let mut state = AppState::new(store, taxonomy, settings.pipeline.clone()).with_data_dir(data);
    if let Some(p) = providers(settings)? {
        state = state.with_providers(p);
    }
    let rt = tokio::runtime::Runtime::new().map_err(data_err)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", settings.port))
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind port {}: {e}", settings.port)))?;
        eprintln!("fashionrec listening on {}", listener.local_addr().map_err(data_err)?);
        server::serve(listener, state).await.map_err(data_err)
    })
}
