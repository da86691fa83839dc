#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::middleware::Next;
use axum::response::Response;
use axum::routing::post;
use axum::{Json, Router};
use base64::Engine;
use fashionrec::providers::{
    BoundingBox, Captioner, CropRequest, Detector, FixtureSet, ImageEmbedder, ImageRef, TextEmbedder,
};
use fashionrec::CatalogStore;
use fashionrec_cli::remote::{
    CaptionRequest, CaptionResponse, CropBody, DetectRequest, DetectResponse, EmbedImageResponse, EmbedTextRequest,
    EmbedTextResponse,
};

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")
}

pub fn demo_fixtures() -> Arc<FixtureSet> {
    Arc::new(FixtureSet::from_dir(demo_dir()).unwrap())
}

pub fn demo_store() -> CatalogStore {
    let mut store = CatalogStore::new();
    let text = std::fs::read_to_string(demo_dir().join("catalog.ndjson")).unwrap();
    let report = store.ingest_str(&text).unwrap();
    assert!(report.rejected.is_empty());
    store
}

/// (path, request body, response body)
pub type Exchange = (String, Vec<u8>, Vec<u8>);

/// Sidecar stand-in answering from the demo fixtures. The uploaded image
/// bytes are the fixture image id.
#[derive(Clone)]
pub struct Sidecar {
    pub fixtures: Arc<FixtureSet>,
    pub delay: Duration,
    pub busy: Arc<AtomicUsize>,
    pub peak: Arc<AtomicUsize>,
    pub requests: Arc<AtomicUsize>,
    /// Status forced on every response when set.
    pub fail_with: Option<u16>,
    /// Every exchange as (path, request body, response body).
    pub log: Arc<Mutex<Vec<Exchange>>>,
}

impl Sidecar {
    pub fn new() -> Self {
        Self {
            fixtures: demo_fixtures(),
            delay: Duration::ZERO,
            busy: Arc::default(),
            peak: Arc::default(),
            requests: Arc::default(),
            fail_with: None,
            log: Arc::default(),
        }
    }

    async fn enter(&self) -> Result<Guard, StatusCode> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let now = self.busy.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let guard = Guard(self.busy.clone());
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
        match self.fail_with {
            Some(s) => Err(StatusCode::from_u16(s).unwrap()),
            None => Ok(guard),
        }
    }
}

pub struct Guard(Arc<AtomicUsize>);

impl Drop for Guard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn image_of(b64: &str, width: u32, height: u32) -> Result<ImageRef, StatusCode> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64)
        .map_err(|_| StatusCode::BAD_REQUEST)?;
    let id = String::from_utf8(bytes).map_err(|_| StatusCode::BAD_REQUEST)?;
    ImageRef::new(id, width, height).map_err(|_| StatusCode::BAD_REQUEST)
}

fn with_crop<T>(c: &CropBody, f: impl FnOnce(&CropRequest<'_>) -> T) -> Result<T, StatusCode> {
    let image = image_of(&c.image, c.width, c.height)?;
    let rect = BoundingBox::try_from(c.bbox).map_err(|_| StatusCode::BAD_REQUEST)?;
    Ok(f(&CropRequest {
        key: &c.key,
        image: &image,
        rect,
    }))
}

async fn detect(State(s): State<Sidecar>, Json(r): Json<DetectRequest>) -> Result<Json<DetectResponse>, StatusCode> {
    let _g = s.enter().await?;
    let image = image_of(&r.image, r.width, r.height)?;
    let detections = s.fixtures.detect(&image).map_err(|_| StatusCode::NOT_FOUND)?;
    Ok(Json(DetectResponse { detections }))
}

async fn embed_image(
    State(s): State<Sidecar>,
    Json(c): Json<CropBody>,
) -> Result<Json<EmbedImageResponse>, StatusCode> {
    let _g = s.enter().await?;
    let e = with_crop(&c, |crop| s.fixtures.embed_image(crop))?.map_err(|_| StatusCode::NOT_FOUND)?;
    Ok(Json(EmbedImageResponse {
        dim: e.dim(),
        values: e.into(),
    }))
}

async fn embed_text(
    State(s): State<Sidecar>,
    Json(r): Json<EmbedTextRequest>,
) -> Result<Json<EmbedTextResponse>, StatusCode> {
    let _g = s.enter().await?;
    let vs = s.fixtures.embed_texts(&r.texts).map_err(|_| StatusCode::NOT_FOUND)?;
    Ok(Json(EmbedTextResponse {
        dim: s.fixtures.dim(),
        vectors: vs.into_iter().map(Into::into).collect(),
    }))
}

async fn caption(State(s): State<Sidecar>, Json(r): Json<CaptionRequest>) -> Result<Json<CaptionResponse>, StatusCode> {
    let _g = s.enter().await?;
    let text = with_crop(&r.crop, |crop| s.fixtures.caption(crop, &r.prompt))?.map_err(|_| StatusCode::NOT_FOUND)?;
    Ok(Json(CaptionResponse { text }))
}

async fn record(State(s): State<Sidecar>, req: Request, next: Next) -> Response {
    let (parts, body) = req.into_parts();
    let path = parts.uri.path().to_owned();
    let req_bytes = axum::body::to_bytes(body, usize::MAX).await.unwrap();
    let resp = next
        .run(Request::from_parts(parts, Body::from(req_bytes.clone())))
        .await;
    let (parts, body) = resp.into_parts();
    let resp_bytes = axum::body::to_bytes(body, usize::MAX).await.unwrap();
    s.log
        .lock()
        .unwrap()
        .push((path, req_bytes.to_vec(), resp_bytes.to_vec()));
    Response::from_parts(parts, Body::from(resp_bytes))
}

/// Starts `sidecar` on an ephemeral port in a background thread and
/// returns its base URL.
pub fn spawn_sidecar(sidecar: Sidecar) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/detect", post(detect))
                .route("/embed_image", post(embed_image))
                .route("/embed_text", post(embed_text))
                .route("/caption", post(caption))
                .layer(axum::middleware::from_fn_with_state(sidecar.clone(), record))
                .with_state(sidecar);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// A port nothing listens on.
pub fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}

pub fn fixture_payload(id: &str) -> HashMap<&'static str, String> {
    let mut m = HashMap::new();
    m.insert("image", id.to_owned());
    m.insert("data", base64::engine::general_purpose::STANDARD.encode(id));
    m
}
