//! HTTP client for an inference sidecar implementing the provider traits.
//!
//! Request and response bodies mirror the fixture file schemas; see
//! `docs/wire.md`. Every request carries the full encoded image and, for
//! per-crop calls, the crop box in pixels.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use fashionrec::providers::{
    Captioner, CropRequest, Detection, Detector, Embedding, ImageEmbedder, ImageRef, ProviderError, TextEmbedder,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropBody {
    pub image: String,
    pub width: u32,
    pub height: u32,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageResponse {
    pub dim: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    #[serde(flatten)]
    pub crop: CropBody,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub text: String,
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    max: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        while *busy >= self.max {
            busy = self.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteProviders {
    base: String,
    agent: ureq::Agent,
    gate: Gate,
}

impl std::fmt::Debug for RemoteProviders {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProviders")
            .field("base", &self.base)
            .field("max_in_flight", &self.gate.max)
            .finish()
    }
}

fn encode(image: &ImageRef) -> Result<String, ProviderError> {
    let bytes = image
        .payload
        .as_deref()
        .ok_or_else(|| ProviderError::InvalidConfig(format!("image {:?} has no payload for the sidecar", image.id)))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
}

fn vector(dim: usize, values: Vec<f64>) -> Result<Embedding, ProviderError> {
    if values.len() != dim {
        return Err(ProviderError::MalformedResponse(format!(
            "declared dim {dim} but got {} values",
            values.len()
        )));
    }
    Embedding::new(values)
}

impl RemoteProviders {
    pub fn new(base_url: &str, timeout: Duration, max_in_flight: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_owned(),
            agent,
            gate: Gate {
                max: max_in_flight.max(1),
                busy: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, ProviderError> {
        let _permit = self.gate.acquire();
        let url = format!("{}{path}", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| ProviderError::RemoteUnavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status >= 500 {
            return Err(ProviderError::RemoteUnavailable(format!(
                "{url}: sidecar returned {status}"
            )));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::MalformedResponse(format!(
                "{url}: rejected with {status}: {text}"
            )));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| ProviderError::MalformedResponse(format!("{url}: {e}")))
    }

    fn crop_body(crop: &CropRequest<'_>) -> Result<CropBody, ProviderError> {
        Ok(CropBody {
            image: encode(crop.image)?,
            width: crop.image.width,
            height: crop.image.height,
            bbox: crop.rect.to_array(),
            key: crop.key.to_owned(),
        })
    }
}

impl Detector for RemoteProviders {
    fn detect(&self, image: &ImageRef) -> Result<Vec<Detection>, ProviderError> {
        let req = DetectRequest {
            image: encode(image)?,
            width: image.width,
            height: image.height,
        };
        Ok(self.post::<_, DetectResponse>("/detect", &req)?.detections)
    }
}

impl ImageEmbedder for RemoteProviders {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn embed_image(&self, crop: &CropRequest<'_>) -> Result<Embedding, ProviderError> {
        let resp: EmbedImageResponse = self.post("/embed_image", &Self::crop_body(crop)?)?;
        vector(resp.dim, resp.values)
    }
}

impl TextEmbedder for RemoteProviders {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        let resp: EmbedTextResponse = self.post("/embed_text", &EmbedTextRequest { texts: texts.to_vec() })?;
        resp.vectors.into_iter().map(|v| vector(resp.dim, v)).collect()
    }
}

impl Captioner for RemoteProviders {
    fn caption(&self, crop: &CropRequest<'_>, prompt: &str) -> Result<String, ProviderError> {
        let req = CaptionRequest {
            crop: Self::crop_body(crop)?,
            prompt: prompt.to_owned(),
        };
        Ok(self.post::<_, CaptionResponse>("/caption", &req)?.text)
    }
}
