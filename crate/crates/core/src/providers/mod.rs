//! Contracts for the three model capabilities (detection, embedding,
//! captioning), the post-processing every detector output goes through,
//! and the file-backed fixture implementation.
//!
//! Remote implementations live outside this crate; they only need to
//! implement the capability traits below.

mod fixture;
mod geometry;

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::taxonomy::GarmentClass;

pub use fixture::{DetectionDoc, EmbeddingsDoc, FixtureSet};
pub use geometry::{crop_rect, iou, BoundingBox};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("no fixture for image {0:?}")]
    MissingFixture(String),
    #[error("remote provider unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("no embedding for key {0:?}")]
    MissingEmbedding(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no caption for key {0:?}")]
    MissingCaption(String),
    #[error("empty caption for key {0:?}")]
    EmptyCaption(String),
    #[error("degenerate box {0:?}")]
    DegenerateBox([f64; 4]),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

impl ProviderError {
    /// Stable machine-readable code used in output documents and API errors.
    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::MissingFixture(_) => "missing_fixture",
            ProviderError::RemoteUnavailable(_) => "remote_unavailable",
            ProviderError::MalformedResponse(_) => "malformed_response",
            ProviderError::MissingEmbedding(_) => "missing_embedding",
            ProviderError::DimensionMismatch { .. } => "dimension_mismatch",
            ProviderError::MissingCaption(_) => "missing_caption",
            ProviderError::EmptyCaption(_) => "empty_caption",
            ProviderError::DegenerateBox(_) => "degenerate_box",
            ProviderError::InvalidConfig(_) => "invalid_config",
        }
    }
}

/// An input image. Fixture providers only use `id`; remote providers also
/// need the encoded bytes in `payload`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    #[serde(rename = "image")]
    pub id: String,
    pub width: u32,
    pub height: u32,
    #[serde(skip)]
    pub payload: Option<Arc<[u8]>>,
}

impl ImageRef {
    pub fn new(id: impl Into<String>, width: u32, height: u32) -> Result<Self, ProviderError> {
        if width == 0 || height == 0 {
            return Err(ProviderError::InvalidConfig("image dimensions must be positive".into()));
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
            payload: None,
        })
    }

    pub fn with_payload(mut self, bytes: impl Into<Arc<[u8]>>) -> Self {
        self.payload = Some(bytes.into());
        self
    }

    /// Key naming the `index`-th crop of this image.
    pub fn crop_key(&self, index: usize) -> String {
        format!("{}_crop{index}", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub garment_class: GarmentClass,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

impl Detection {
    /// Total order: confidence descending, then x1, y1, x2, y2, class.
    pub fn order(a: &Detection, b: &Detection) -> Ordering {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.bbox.x1().total_cmp(&b.bbox.x1()))
            .then_with(|| a.bbox.y1().total_cmp(&b.bbox.y1()))
            .then_with(|| a.bbox.x2().total_cmp(&b.bbox.x2()))
            .then_with(|| a.bbox.y2().total_cmp(&b.bbox.y2()))
            .then_with(|| a.garment_class.cmp(&b.garment_class))
    }
}

/// Dense real vector from an image or text encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::MalformedResponse("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::MalformedResponse("non-finite embedding value".into()));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = ProviderError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(v)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// One crop handed to the image embedder or captioner.
#[derive(Debug, Clone, Copy)]
pub struct CropRequest<'a> {
    pub key: &'a str,
    pub image: &'a ImageRef,
    pub rect: BoundingBox,
}

pub trait Detector: Send + Sync {
    /// Raw detections; post-processing happens in [`ProviderBundle::detect`].
    fn detect(&self, image: &ImageRef) -> Result<Vec<Detection>, ProviderError>;
}

pub trait ImageEmbedder: Send + Sync {
    /// Output dimension, when known without a call.
    fn dim(&self) -> Option<usize>;
    fn embed_image(&self, crop: &CropRequest<'_>) -> Result<Embedding, ProviderError>;
}

pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> Option<usize>;
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError>;
}

pub trait Captioner: Send + Sync {
    fn caption(&self, crop: &CropRequest<'_>, prompt: &str) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSettings {
    /// Detections below this confidence are dropped.
    pub confidence_threshold: f64,
    /// Same-class detections overlapping above this IoU are merged into
    /// the more confident one.
    pub dedupe_iou: f64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.25,
            dedupe_iou: 0.7,
        }
    }
}

/// The four capability handles the pipeline needs.
#[derive(Clone)]
pub struct ProviderBundle {
    detector: Arc<dyn Detector>,
    image_embedder: Arc<dyn ImageEmbedder>,
    text_embedder: Arc<dyn TextEmbedder>,
    captioner: Arc<dyn Captioner>,
    settings: DetectionSettings,
}

impl std::fmt::Debug for ProviderBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderBundle")
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl ProviderBundle {
    pub fn new(
        detector: Arc<dyn Detector>,
        image_embedder: Arc<dyn ImageEmbedder>,
        text_embedder: Arc<dyn TextEmbedder>,
        captioner: Arc<dyn Captioner>,
    ) -> Result<Self, ProviderError> {
        if let (Some(a), Some(b)) = (image_embedder.dim(), text_embedder.dim()) {
            if a != b {
                return Err(ProviderError::DimensionMismatch { expected: a, got: b });
            }
        }
        Ok(Self {
            detector,
            image_embedder,
            text_embedder,
            captioner,
            settings: DetectionSettings::default(),
        })
    }

    /// All four capabilities backed by one fixture set.
    pub fn from_fixtures(fixtures: Arc<FixtureSet>) -> Self {
        Self::new(fixtures.clone(), fixtures.clone(), fixtures.clone(), fixtures)
            .expect("a fixture set has a single dimension")
    }

    pub fn with_settings(mut self, settings: DetectionSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn settings(&self) -> DetectionSettings {
        self.settings
    }

    /// Detections clamped to the image, thresholded, de-duplicated per class
    /// and ordered by [`Detection::order`].
    pub fn detect(&self, image: &ImageRef) -> Result<Vec<Detection>, ProviderError> {
        let raw = self.detector.detect(image)?;
        postprocess(raw, image, &self.settings)
    }

    pub fn embed_image(&self, crop: &CropRequest<'_>) -> Result<Embedding, ProviderError> {
        let e = self.image_embedder.embed_image(crop)?;
        if let Some(expected) = self.text_embedder.dim().or(self.image_embedder.dim()) {
            if e.dim() != expected {
                return Err(ProviderError::DimensionMismatch { expected, got: e.dim() });
            }
        }
        Ok(e)
    }

    /// One embedding per input text, in input order.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        let out = self.text_embedder.embed_texts(texts)?;
        if out.len() != texts.len() {
            return Err(ProviderError::MalformedResponse(format!(
                "asked for {} text embeddings, got {}",
                texts.len(),
                out.len()
            )));
        }
        if let Some(first) = out.first() {
            let expected = self.text_embedder.dim().unwrap_or(first.dim());
            if let Some(bad) = out.iter().find(|e| e.dim() != expected) {
                return Err(ProviderError::DimensionMismatch {
                    expected,
                    got: bad.dim(),
                });
            }
        }
        Ok(out)
    }

    /// Generated caption text; must be non-blank.
    pub fn caption(&self, crop: &CropRequest<'_>, prompt: &str) -> Result<String, ProviderError> {
        let text = self.captioner.caption(crop, prompt)?;
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyCaption(crop.key.to_owned()));
        }
        Ok(text)
    }
}

fn postprocess(
    raw: Vec<Detection>,
    image: &ImageRef,
    settings: &DetectionSettings,
) -> Result<Vec<Detection>, ProviderError> {
    let mut kept = Vec::with_capacity(raw.len());
    for d in raw {
        if !(d.confidence.is_finite() && (0.0..=1.0).contains(&d.confidence)) {
            return Err(ProviderError::MalformedResponse(format!(
                "confidence {} outside [0, 1]",
                d.confidence
            )));
        }
        if d.confidence < settings.confidence_threshold {
            continue;
        }
        // a box entirely outside the frame has nothing to crop
        let Ok(bbox) = d.bbox.clamp_to(image.width, image.height) else {
            continue;
        };
        kept.push(Detection { bbox, ..d });
    }
    kept.sort_by(Detection::order);

    let mut out: Vec<Detection> = Vec::with_capacity(kept.len());
    for d in kept {
        let dup = out
            .iter()
            .any(|k| k.garment_class == d.garment_class && iou(&k.bbox, &d.bbox) > settings.dedupe_iou);
        if !dup {
            out.push(d);
        }
    }
    Ok(out)
}
