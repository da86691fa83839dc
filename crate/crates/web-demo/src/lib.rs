//! Browser demo: catalog search, zero-shot crop labelling and full outfit
//! recommendation over the bundled demo fixtures.
//!
//! [`Demo`] holds the logic and is usable natively; [`DemoApp`] is the thin
//! JavaScript-facing wrapper. Every operation returns a JSON string.

use std::collections::BTreeMap;
use std::sync::Arc;

use fashionrec::catalog::CatalogStore;
use fashionrec::pipeline::ProductHit;
use fashionrec::providers::{EmbeddingsDoc, FixtureSet};
use fashionrec::search::ScoringParams;
use fashionrec::vision::{classify, ClassificationResult};
use fashionrec::{recommend, Embedding, PipelineConfig, ProviderBundle, Taxonomy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

macro_rules! fixture {
    ($path:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/demo/", $path))
    };
}

const DETECTIONS: [&str; 10] = [
    fixture!("detections/img_001.json"),
    fixture!("detections/img_002.json"),
    fixture!("detections/img_003.json"),
    fixture!("detections/img_004.json"),
    fixture!("detections/img_005.json"),
    fixture!("detections/img_006.json"),
    fixture!("detections/img_007.json"),
    fixture!("detections/img_008.json"),
    fixture!("detections/img_009.json"),
    fixture!("detections/img_010.json"),
];
const EMBEDDINGS: &str = fixture!("embeddings.json");
const CAPTIONS: &str = fixture!("captions.json");
const CATALOG: &str = fixture!("catalog.ndjson");

#[derive(Debug, Serialize)]
struct Overview {
    images: Vec<String>,
    clusters: Vec<String>,
    labels: Vec<String>,
    crops: Vec<String>,
    records: usize,
}

#[derive(Debug, Serialize)]
struct SearchOutput {
    cluster: Option<String>,
    fallback: bool,
    hits: Vec<ProductHit>,
}

pub struct Demo {
    store: CatalogStore,
    fixtures: Arc<FixtureSet>,
    vectors: BTreeMap<String, Embedding>,
    taxonomy: Taxonomy,
}

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(text)
}

impl Demo {
    pub fn new() -> Result<Self, String> {
        let mut store = CatalogStore::new();
        store.ingest_str(CATALOG).map_err(text)?;
        let fixtures = FixtureSet::from_json(DETECTIONS, EMBEDDINGS, CAPTIONS).map_err(text)?;
        let doc: EmbeddingsDoc = serde_json::from_str(EMBEDDINGS).map_err(text)?;
        Ok(Self {
            store,
            fixtures: Arc::new(fixtures),
            vectors: doc.vectors,
            taxonomy: Taxonomy::default(),
        })
    }

    /// Image ids, cluster names, label vocabulary and crop keys.
    pub fn overview(&self) -> Result<String, String> {
        let labels: Vec<String> = self
            .taxonomy
            .iter()
            .flat_map(|(_, ls)| ls.iter().cloned())
            .filter(|l| self.vectors.contains_key(l))
            .collect();
        json(&Overview {
            images: self.fixtures.image_ids().map(str::to_owned).collect(),
            clusters: self.store.list_clusters().into_iter().map(|c| c.name).collect(),
            crops: self.vectors.keys().filter(|k| k.contains("_crop")).cloned().collect(),
            labels,
            records: self.store.len(),
        })
    }

    /// Ranked catalog hits with per-term score explanations.
    pub fn search(
        &self,
        cluster: &str,
        query: &str,
        top_k: usize,
        k1: f64,
        b: f64,
        proximity_weight: f64,
    ) -> Result<String, String> {
        let params = ScoringParams {
            k1,
            b,
            proximity_weight,
        };
        let cluster = Some(cluster.trim()).filter(|c| !c.is_empty());
        let routed = self.store.search(cluster, &params, query, top_k, true).map_err(text)?;
        let hits = routed
            .hits
            .into_iter()
            .map(|h| {
                Ok(ProductHit {
                    product: self.store.get(&h.doc_id).map_err(text)?.clone(),
                    score: h.score,
                    explanation: h.explanation,
                })
            })
            .collect::<Result<_, String>>()?;
        json(&SearchOutput {
            cluster: routed.cluster,
            fallback: routed.fallback,
            hits,
        })
    }

    /// Cosine ranking of a fixture crop against the chosen labels.
    pub fn classify_crop(&self, crop_key: &str, labels: &[String]) -> Result<String, String> {
        let image = self
            .vectors
            .get(crop_key)
            .ok_or_else(|| format!("no embedding for crop {crop_key:?}"))?;
        let candidates = labels
            .iter()
            .map(|l| {
                self.vectors
                    .get(l)
                    .map(|v| (l.clone(), v.clone()))
                    .ok_or_else(|| format!("no embedding for label {l:?}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let result: ClassificationResult = classify(image, &candidates).map_err(text)?;
        json(&result)
    }

    /// Full recommendation document for a fixture image.
    pub fn recommend(&self, image: &str, top_k: usize) -> Result<String, String> {
        let image = self
            .fixtures
            .image(image)
            .ok_or_else(|| format!("no fixture image {image:?}"))?;
        let cfg = PipelineConfig {
            top_k,
            ..PipelineConfig::default()
        };
        let bundle = ProviderBundle::from_fixtures(self.fixtures.clone());
        let recs = recommend(&image, &bundle, &self.taxonomy, &self.store, &cfg).map_err(text)?;
        json(&recs)
    }
}

#[wasm_bindgen]
pub struct DemoApp {
    inner: Demo,
}

#[wasm_bindgen]
impl DemoApp {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<DemoApp, JsError> {
        Demo::new().map(|inner| DemoApp { inner }).map_err(|e| JsError::new(&e))
    }

    pub fn overview(&self) -> Result<String, JsError> {
        self.inner.overview().map_err(|e| JsError::new(&e))
    }

    pub fn search(
        &self,
        cluster: &str,
        query: &str,
        top_k: usize,
        k1: f64,
        b: f64,
        proximity_weight: f64,
    ) -> Result<String, JsError> {
        self.inner
            .search(cluster, query, top_k, k1, b, proximity_weight)
            .map_err(|e| JsError::new(&e))
    }

    /// `labels` is a comma-separated list.
    #[wasm_bindgen(js_name = classifyCrop)]
    pub fn classify_crop(&self, crop_key: &str, labels: &str) -> Result<String, JsError> {
        let labels: Vec<String> = labels
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        self.inner
            .classify_crop(crop_key, &labels)
            .map_err(|e| JsError::new(&e))
    }

    pub fn recommend(&self, image: &str, top_k: usize) -> Result<String, JsError> {
        self.inner.recommend(image, top_k).map_err(|e| JsError::new(&e))
    }
}
