//! Deterministic file-backed providers.
//!
//! A fixture directory holds:
//!
//! - `detections/<image>.json`: `{image, width, height, detections: [{class, confidence, box}]}`
//! - `embeddings.json`: `{dim, vectors: {key: [dim reals]}}`; crop keys are
//!   `<image>_crop<i>`, label keys are the raw label text
//! - `captions.json`: `{crop key: caption text}`

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Captioner, CropRequest, Detection, Detector, Embedding, ImageEmbedder, ImageRef, ProviderError, TextEmbedder,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionDoc {
    pub image: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsDoc {
    pub dim: usize,
    pub vectors: BTreeMap<String, Embedding>,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSet {
    images: BTreeMap<String, DetectionDoc>,
    dim: usize,
    vectors: HashMap<String, Embedding>,
    captions: HashMap<String, String>,
}

fn malformed(what: &str, e: impl std::fmt::Display) -> ProviderError {
    ProviderError::MalformedResponse(format!("{what}: {e}"))
}

impl FixtureSet {
    pub fn from_docs(
        detections: impl IntoIterator<Item = DetectionDoc>,
        embeddings: EmbeddingsDoc,
        captions: HashMap<String, String>,
    ) -> Result<Self, ProviderError> {
        if embeddings.dim == 0 {
            return Err(ProviderError::InvalidConfig("embedding dim must be positive".into()));
        }
        for v in embeddings.vectors.values() {
            if v.dim() != embeddings.dim {
                return Err(ProviderError::DimensionMismatch {
                    expected: embeddings.dim,
                    got: v.dim(),
                });
            }
        }
        let mut images = BTreeMap::new();
        for doc in detections {
            ImageRef::new(doc.image.clone(), doc.width, doc.height)?;
            if images.insert(doc.image.clone(), doc).is_some() {
                return Err(ProviderError::InvalidConfig(
                    "duplicate image in detection fixtures".into(),
                ));
            }
        }
        Ok(Self {
            images,
            dim: embeddings.dim,
            vectors: embeddings.vectors.into_iter().collect(),
            captions,
        })
    }

    /// Parses fixture documents already in memory.
    pub fn from_json<'a>(
        detection_docs: impl IntoIterator<Item = &'a str>,
        embeddings: &str,
        captions: &str,
    ) -> Result<Self, ProviderError> {
        let docs = detection_docs
            .into_iter()
            .map(|s| serde_json::from_str::<DetectionDoc>(s).map_err(|e| malformed("detections", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let emb = serde_json::from_str(embeddings).map_err(|e| malformed("embeddings", e))?;
        let caps = serde_json::from_str(captions).map_err(|e| malformed("captions", e))?;
        Self::from_docs(docs, emb, caps)
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let dir = dir.as_ref();
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| ProviderError::InvalidConfig(format!("{}: {e}", p.display())))
        };
        let det_dir = dir.join("detections");
        let mut paths: Vec<_> = std::fs::read_dir(&det_dir)
            .map_err(|e| ProviderError::InvalidConfig(format!("{}: {e}", det_dir.display())))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let docs = paths.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
        let emb = read(&dir.join("embeddings.json"))?;
        let caps = read(&dir.join("captions.json"))?;
        Self::from_json(docs.iter().map(String::as_str), &emb, &caps)
    }

    pub fn image(&self, id: &str) -> Option<ImageRef> {
        self.images.get(id).map(|d| ImageRef {
            id: d.image.clone(),
            width: d.width,
            height: d.height,
            payload: None,
        })
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.images.keys().map(String::as_str)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, key: &str) -> Result<Embedding, ProviderError> {
        self.vectors
            .get(key)
            .cloned()
            .ok_or_else(|| ProviderError::MissingEmbedding(key.to_owned()))
    }
}

impl Detector for FixtureSet {
    fn detect(&self, image: &ImageRef) -> Result<Vec<Detection>, ProviderError> {
        self.images
            .get(&image.id)
            .map(|d| d.detections.clone())
            .ok_or_else(|| ProviderError::MissingFixture(image.id.clone()))
    }
}

impl ImageEmbedder for FixtureSet {
    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_image(&self, crop: &CropRequest<'_>) -> Result<Embedding, ProviderError> {
        self.vector(crop.key)
    }
}

impl TextEmbedder for FixtureSet {
    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        texts.iter().map(|t| self.vector(t)).collect()
    }
}

impl Captioner for FixtureSet {
    fn caption(&self, crop: &CropRequest<'_>, _prompt: &str) -> Result<String, ProviderError> {
        self.captions
            .get(crop.key)
            .cloned()
            .ok_or_else(|| ProviderError::MissingCaption(crop.key.to_owned()))
    }
}
