//! `/v1` HTTP API over a shared catalog store.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use fashionrec::catalog::{CatalogError, ClusterInfo, IngestReport};
use fashionrec::pipeline::{PipelineError, ProductHit};
use fashionrec::providers::{FixtureSet, ImageRef, ProviderError};
use fashionrec::search::{analyze, SearchError};
use fashionrec::{recommend, CatalogStore, PipelineConfig, ProviderBundle, Recommendations, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::store::DataDir;

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

fn provider_error(e: &ProviderError) -> ApiError {
    let status = match e {
        ProviderError::RemoteUnavailable(_) | ProviderError::MalformedResponse(_) => StatusCode::BAD_GATEWAY,
        ProviderError::MissingFixture(_) => StatusCode::NOT_FOUND,
        ProviderError::InvalidConfig(_) | ProviderError::DegenerateBox(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    ApiError::new(status, e.code(), e.to_string())
}

#[derive(Clone)]
pub enum Providers {
    Fixtures(Arc<FixtureSet>),
    Remote(ProviderBundle),
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RwLock<CatalogStore>>,
    pub providers: Option<Providers>,
    pub taxonomy: Arc<Taxonomy>,
    pub pipeline: PipelineConfig,
    /// When set, bulk ingests are appended to this directory's log.
    pub data: Option<DataDir>,
}

impl AppState {
    pub fn new(store: CatalogStore, taxonomy: Taxonomy, pipeline: PipelineConfig) -> Self {
        Self {
            store: Arc::new(RwLock::new(store)),
            providers: None,
            taxonomy: Arc::new(taxonomy),
            pipeline,
            data: None,
        }
    }

    pub fn with_providers(mut self, providers: Providers) -> Self {
        self.providers = Some(providers);
        self
    }

    pub fn with_data_dir(mut self, data: DataDir) -> Self {
        self.data = Some(data);
        self
    }

    fn mode(&self) -> &'static str {
        match self.providers {
            Some(Providers::Fixtures(_)) => "fixtures",
            Some(Providers::Remote(_)) => "remote",
            None => "catalog_only",
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/catalog/bulk", post(bulk))
        .route("/v1/search", get(search))
        .route("/v1/recommend", post(recommend_handler))
        .route("/v1/products/{id}", get(product))
        .route("/v1/clusters", get(clusters))
        .route("/v1/health", get(health))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

async fn bulk(State(st): State<AppState>, body: Bytes) -> Result<Json<IngestReport>, ApiError> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "body must be UTF-8"))?;
    if text.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty_body",
            "request body is empty",
        ));
    }
    let text = text.to_owned();
    tokio::task::spawn_blocking(move || {
        let mut store = st.store.write().unwrap_or_else(|e| e.into_inner());
        match &st.data {
            Some(d) => d.ingest(&mut store, text.as_bytes()),
            None => store.ingest_str(&text),
        }
    })
    .await
    .map_err(internal)?
    .map(Json)
    .map_err(internal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub cluster: Option<String>,
    pub fallback: bool,
    pub hits: Vec<ProductHit>,
}

async fn search(
    State(st): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<SearchResponse>, ApiError> {
    let q = params.get("q").map(String::as_str).unwrap_or("");
    if analyze(q).is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty_query",
            "query has no searchable tokens",
        ));
    }
    let k = match params.get("k") {
        None => st.pipeline.top_k,
        Some(v) => v.parse().ok().filter(|k| *k >= 1).ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_top_k",
                format!("k must be a positive integer, got {v:?}"),
            )
        })?,
    };
    let fallback = match params.get("fallback").map(String::as_str) {
        None => st.pipeline.fallback_all_clusters,
        Some("true" | "1") => true,
        Some("false" | "0") => false,
        Some(v) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_request",
                format!("fallback must be true or false, got {v:?}"),
            ))
        }
    };
    let cluster = params
        .get("cluster")
        .map(String::as_str)
        .filter(|c| !c.trim().is_empty());

    let store = st.store.read().unwrap_or_else(|e| e.into_inner());
    let routed = store
        .search(cluster, &st.pipeline.scoring, q, k, fallback)
        .map_err(|e| match e {
            CatalogError::UnknownCluster(c) => ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_cluster",
                format!("no cluster named {c:?}"),
            ),
            CatalogError::Search(SearchError::EmptyQuery) => {
                ApiError::new(StatusCode::BAD_REQUEST, "empty_query", "query has no searchable tokens")
            }
            other => internal(other),
        })?;
    let hits = routed
        .hits
        .into_iter()
        .map(|h| {
            let product = store.get(&h.doc_id).map_err(internal)?.clone();
            Ok(ProductHit {
                score: h.score,
                explanation: h.explanation,
                product,
            })
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(Json(SearchResponse {
        cluster: routed.cluster,
        fallback: routed.fallback,
        hits,
    }))
}

/// `image` names a fixture image, or in remote mode labels the uploaded
/// bytes carried base64-encoded in `data`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    pub image: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub data: Option<String>,
    pub top_k: Option<usize>,
}

async fn recommend_handler(State(st): State<AppState>, body: Bytes) -> Result<Json<Recommendations>, ApiError> {
    let req: RecommendRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))?;
    let Some(providers) = st.providers.clone() else {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "no_providers",
            "server started without fixtures or a remote sidecar",
        ));
    };
    let (image, bundle) = match providers {
        Providers::Fixtures(set) => {
            let image = set.image(&req.image).ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "unknown_image",
                    format!("no fixture image {:?}", req.image),
                )
            })?;
            (image, ProviderBundle::from_fixtures(set))
        }
        Providers::Remote(bundle) => {
            let (Some(w), Some(h), Some(data)) = (req.width, req.height, req.data.as_deref()) else {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_request",
                    "remote mode needs width, height and base64 data",
                ));
            };
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(data)
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", format!("data: {e}")))?;
            let image = ImageRef::new(req.image.clone(), w, h)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.to_string()))?
                .with_payload(bytes);
            (image, bundle)
        }
    };
    let mut cfg = st.pipeline.clone();
    if let Some(k) = req.top_k {
        cfg.top_k = k;
    }
    tokio::task::spawn_blocking(move || {
        let store = st.store.read().unwrap_or_else(|e| e.into_inner());
        recommend(&image, &bundle, &st.taxonomy, &store, &cfg)
    })
    .await
    .map_err(internal)?
    .map(Json)
    .map_err(|e| match e {
        PipelineError::Provider(p) => provider_error(&p),
        PipelineError::InvalidConfig(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", m),
    })
}

async fn product(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = st.store.read().unwrap_or_else(|e| e.into_inner());
    match store.get(&id) {
        Ok(r) => Ok(Json(r).into_response()),
        Err(_) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no product {id:?}"),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersResponse {
    pub clusters: Vec<ClusterInfo>,
}

async fn clusters(State(st): State<AppState>) -> Json<ClustersResponse> {
    let store = st.store.read().unwrap_or_else(|e| e.into_inner());
    Json(ClustersResponse {
        clusters: store.list_clusters(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub mode: String,
    pub records: usize,
    pub clusters: usize,
}

async fn health(State(st): State<AppState>) -> Json<Health> {
    let store = st.store.read().unwrap_or_else(|e| e.into_inner());
    Json(Health {
        status: "ok".into(),
        mode: st.mode().into(),
        records: store.len(),
        clusters: store.list_clusters().len(),
    })
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
