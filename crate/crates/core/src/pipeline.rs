//! End-to-end recommendation: detect garments, crop, label each crop
//! zero-shot, caption it, and run a match query in the label's cluster.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogError, CatalogStore, ProductRecord};
use crate::eval::RetrievalRun;
use crate::providers::{
    crop_rect, BoundingBox, CropRequest, Detection, DetectionSettings, ImageRef, ProviderBundle, ProviderError,
};
use crate::search::{normalize_label, Explanation, ScoredHit, ScoringParams, SearchError};
use crate::taxonomy::Taxonomy;
use crate::vision::{
    build_prompt, classify, finalize_caption, Caption, ClassificationResult, LabelTemplate, VisionError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub top_k: usize,
    pub scoring: ScoringParams,
    pub confidence_threshold: f64,
    /// Search every cluster when the assigned label has no cluster.
    pub fallback_all_clusters: bool,
    pub pad_frac: f64,
    pub label_template: LabelTemplate,
    /// Worker threads for per-detection processing; 1 runs inline.
    pub parallelism: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            scoring: ScoringParams::default(),
            confidence_threshold: DetectionSettings::default().confidence_threshold,
            fallback_all_clusters: true,
            pad_frac: 0.0,
            label_template: LabelTemplate::default(),
            parallelism: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.top_k == 0 {
            return Err(PipelineError::InvalidConfig("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(PipelineError::InvalidConfig(
                "confidence_threshold must be in [0, 1]".into(),
            ));
        }
        if !(self.pad_frac.is_finite() && self.pad_frac >= 0.0) {
            return Err(PipelineError::InvalidConfig("pad_frac must be >= 0".into()));
        }
        self.scoring
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

/// Failure confined to one detected item.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ItemError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error("search failed: {0}")]
    Search(String),
    #[error("no cluster for label {0:?}")]
    UnknownCluster(String),
}

impl From<SearchError> for ItemError {
    fn from(e: SearchError) -> Self {
        ItemError::Search(e.to_string())
    }
}

impl ItemError {
    pub fn code(&self) -> &'static str {
        match self {
            ItemError::Provider(e) => e.code(),
            ItemError::Vision(VisionError::EmptyCaption) => "empty_caption",
            ItemError::Vision(VisionError::DimensionMismatch { .. }) => "dimension_mismatch",
            ItemError::Vision(VisionError::ZeroVector(_)) => "zero_vector",
            ItemError::Vision(_) => "classification_failed",
            ItemError::Search(_) => "search_failed",
            ItemError::UnknownCluster(_) => "unknown_cluster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<&ItemError> for ErrorBody {
    fn from(e: &ItemError) -> Self {
        Self {
            code: e.code().to_owned(),
            message: e.to_string(),
        }
    }
}

/// A ranked hit joined with its catalog record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductHit {
    pub score: f64,
    pub explanation: Explanation,
    pub product: ProductRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationGroup {
    pub detection: Detection,
    pub crop_key: String,
    pub crop_box: BoundingBox,
    pub assigned_label: String,
    pub classification: ClassificationResult,
    pub caption: Caption,
    pub cluster: String,
    pub query_text: String,
    /// True when the label had no cluster and every cluster was searched.
    pub fallback: bool,
    pub hits: Vec<ProductHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedGroup {
    pub detection: Detection,
    pub crop_key: String,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GroupOutcome {
    Ok(Box<RecommendationGroup>),
    Error(FailedGroup),
}

impl GroupOutcome {
    pub fn group(&self) -> Option<&RecommendationGroup> {
        match self {
            GroupOutcome::Ok(g) => Some(g),
            GroupOutcome::Error(_) => None,
        }
    }

    pub fn detection(&self) -> &Detection {
        match self {
            GroupOutcome::Ok(g) => &g.detection,
            GroupOutcome::Error(f) => &f.detection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendStatus {
    Ok,
    NoDetections,
}

/// Output document: one entry per surviving detection, in detection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendations {
    pub image: String,
    pub status: RecommendStatus,
    pub groups: Vec<GroupOutcome>,
}

impl Recommendations {
    /// One retrieval run per successful group, keyed by crop; `relevance`
    /// maps crop keys to the product ids judged relevant.
    pub fn retrieval_runs(&self, relevance: &BTreeMap<String, Vec<String>>) -> Vec<RetrievalRun> {
        self.groups
            .iter()
            .filter_map(GroupOutcome::group)
            .map(|g| RetrievalRun {
                query: g.crop_key.clone(),
                hits: g.hits.iter().map(|h| h.product.id.clone()).collect(),
                relevant: relevance.get(&g.crop_key).cloned().unwrap_or_default(),
            })
            .collect()
    }
}

/// Cluster to search and query text for a labelled caption.
///
/// The prompt boilerplate is left out; the label appears once, followed by
/// the caption body.
pub fn build_query(label: &str, caption: &Caption) -> (String, String) {
    (normalize_label(label), format!("{label} {}", caption.body))
}

pub fn recommend(
    image: &ImageRef,
    providers: &ProviderBundle,
    taxonomy: &Taxonomy,
    store: &CatalogStore,
    cfg: &PipelineConfig,
) -> Result<Recommendations, PipelineError> {
    cfg.validate()?;
    let providers = providers.clone().with_settings(DetectionSettings {
        confidence_threshold: cfg.confidence_threshold,
        ..providers.settings()
    });
    let detections = providers.detect(image)?;
    if detections.is_empty() {
        return Ok(Recommendations {
            image: image.id.clone(),
            status: RecommendStatus::NoDetections,
            groups: Vec::new(),
        });
    }

    let ctx = ItemContext {
        image,
        providers: &providers,
        taxonomy,
        store,
        cfg,
    };
    let workers = cfg.parallelism.clamp(1, detections.len());
    let groups = if workers == 1 {
        detections.iter().enumerate().map(|(i, d)| ctx.process(i, d)).collect()
    } else {
        let mut slots: Vec<Option<GroupOutcome>> = vec![None; detections.len()];
        let chunk = detections.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (c, (dets, out)) in detections.chunks(chunk).zip(slots.chunks_mut(chunk)).enumerate() {
                let ctx = &ctx;
                scope.spawn(move || {
                    for (j, (d, slot)) in dets.iter().zip(out.iter_mut()).enumerate() {
                        *slot = Some(ctx.process(c * chunk + j, d));
                    }
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every detection processed"))
            .collect()
    };
    Ok(Recommendations {
        image: image.id.clone(),
        status: RecommendStatus::Ok,
        groups,
    })
}

struct ItemContext<'a> {
    image: &'a ImageRef,
    providers: &'a ProviderBundle,
    taxonomy: &'a Taxonomy,
    store: &'a CatalogStore,
    cfg: &'a PipelineConfig,
}

impl ItemContext<'_> {
    fn process(&self, index: usize, detection: &Detection) -> GroupOutcome {
        let crop_key = self.image.crop_key(index);
        match self.run(&crop_key, detection) {
            Ok(group) => GroupOutcome::Ok(Box::new(group)),
            Err(e) => GroupOutcome::Error(FailedGroup {
                detection: detection.clone(),
                crop_key,
                error: ErrorBody::from(&e),
            }),
        }
    }

    fn run(&self, crop_key: &str, detection: &Detection) -> Result<RecommendationGroup, ItemError> {
        let rect = crop_rect(self.image.width, self.image.height, &detection.bbox, self.cfg.pad_frac)?;
        let crop = CropRequest {
            key: crop_key,
            image: self.image,
            rect,
        };
        let image_emb = self.providers.embed_image(&crop)?;

        let labels = self.taxonomy.subcategories(detection.garment_class);
        let texts: Vec<String> = labels.iter().map(|l| self.cfg.label_template.apply(l)).collect();
        let label_embs = self.providers.embed_texts(&texts)?;
        let candidates: Vec<(String, _)> = labels.iter().cloned().zip(label_embs).collect();
        let classification = classify(&image_emb, &candidates)?;
        let label = classification.label.clone();

        let prompt = build_prompt(&label)?;
        let generated = self.providers.caption(&crop, &prompt)?;
        let caption = finalize_caption(&label, &prompt, &generated)?;
        let (cluster, query_text) = build_query(&label, &caption);

        let routed = self
            .store
            .search(
                Some(&cluster),
                &self.cfg.scoring,
                &query_text,
                self.cfg.top_k,
                self.cfg.fallback_all_clusters,
            )
            .map_err(|e| match e {
                CatalogError::UnknownCluster(c) => ItemError::UnknownCluster(c),
                other => ItemError::Search(other.to_string()),
            })?;
        let fallback = routed.fallback;
        let scored = routed.hits;
        let hits = scored
            .into_iter()
            .map(|h| self.join(h))
            .collect::<Result<Vec<_>, _>>()?;

        Ok(RecommendationGroup {
            detection: detection.clone(),
            crop_key: crop_key.to_owned(),
            crop_box: rect,
            assigned_label: label,
            classification,
            caption,
            cluster,
            query_text,
            fallback,
            hits,
        })
    }

    fn join(&self, hit: ScoredHit) -> Result<ProductHit, ItemError> {
        let product = self
            .store
            .get(&hit.doc_id)
            .map_err(|e| ItemError::Search(e.to_string()))?
            .clone();
        Ok(ProductHit {
            score: hit.score,
            explanation: hit.explanation,
            product,
        })
    }
}

/// Train/holdout sizes for a dataset split: `train = ⌊total · fraction⌋`.
///
/// The fraction is taken at its shortest decimal representation, so 0.9
/// means exactly 9/10 rather than the nearest binary double.
pub fn split_counts(total: u64, train_fraction: f64) -> Result<(u64, u64), PipelineError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PipelineError::InvalidConfig(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let repr = format!("{train_fraction}");
    let (num, den) = match repr.split_once('.') {
        Some(("0", digits)) if !digits.is_empty() && digits.len() <= 30 => {
            let num: u128 = digits.parse().expect("decimal digits");
            (num, 10u128.pow(digits.len() as u32))
        }
        // exponent notation for very small fractions; fall back to floating point
        _ => {
            let train = (total as f64 * train_fraction).floor() as u64;
            return Ok((train, total - train));
        }
    };
    let train = (u128::from(total) * num / den) as u64;
    Ok((train, total - train))
}
