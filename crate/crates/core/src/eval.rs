//! Detection metrics (IoU matching, precision/recall/F1, PR curve) and
//! retrieval metrics (precision@k, MRR).

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use crate::providers::iou;
use crate::providers::{BoundingBox, Detection, DetectionDoc};
use crate::taxonomy::GarmentClass;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    #[serde(rename = "class")]
    pub garment_class: GarmentClass,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// Ground truth for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub image: String,
    #[serde(default)]
    pub truths: Vec<Truth>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Greedy one-to-one matching. Predictions are visited by confidence
/// (descending); each takes the unmatched truth of its class with the
/// highest IoU, provided that IoU reaches `iou_threshold`.
pub fn match_detections(preds: &[Detection], truths: &[Truth], iou_threshold: f64) -> MatchCounts {
    let mut order: Vec<&Detection> = preds.iter().collect();
    order.sort_by(|a, b| Detection::order(a, b));
    let mut taken = vec![false; truths.len()];
    let mut tp = 0;
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (i, t) in truths.iter().enumerate() {
            if taken[i] || t.garment_class != p.garment_class {
                continue;
            }
            let overlap = iou(&p.bbox, &t.bbox);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((i, overlap));
            }
        }
        if let Some((i, _)) = best {
            taken[i] = true;
            tp += 1;
        }
    }
    MatchCounts {
        tp,
        fp: preds.len() - tp,
        fn_: truths.len() - tp,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(precision, recall, f1)`, each 0 when its denominator is 0.
///
/// F1 is evaluated as `2tp / (2tp + fp + fn)`, the harmonic mean of
/// precision and recall written over the counts.
pub fn precision_recall_f1(c: MatchCounts) -> (f64, f64, f64) {
    let p = ratio(c.tp, c.tp + c.fp);
    let r = ratio(c.tp, c.tp + c.fn_);
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    (p, r, f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// PR curve for a single image.
pub fn pr_curve(preds: &[Detection], truths: &[Truth], iou_threshold: f64) -> Vec<PRPoint> {
    pr_curve_images(&[(preds.to_vec(), truths.to_vec())], iou_threshold)
}

/// PR curve pooled over several images: one point per distinct confidence,
/// from the highest down, counting predictions at or above it.
pub fn pr_curve_images(images: &[(Vec<Detection>, Vec<Truth>)], iou_threshold: f64) -> Vec<PRPoint> {
    let mut thresholds: Vec<f64> = images
        .iter()
        .flat_map(|(p, _)| p.iter().map(|d| d.confidence))
        .collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    thresholds
        .into_iter()
        .map(|t| {
            let mut counts = MatchCounts::default();
            for (preds, truths) in images {
                let kept: Vec<Detection> = preds.iter().filter(|d| d.confidence >= t).cloned().collect();
                counts += match_detections(&kept, truths, iou_threshold);
            }
            let (precision, recall, _) = precision_recall_f1(counts);
            PRPoint {
                threshold: t,
                precision,
                recall,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<MatchCounts> for Metrics {
    fn from(counts: MatchCounts) -> Self {
        let (precision, recall, f1) = precision_recall_f1(counts);
        Self {
            counts,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub iou_threshold: f64,
    pub images: usize,
    pub aggregate: Metrics,
    pub per_class: BTreeMap<GarmentClass, Metrics>,
    pub pr_curve: Vec<PRPoint>,
}

/// Scores prediction documents against ground truth, pairing them by image
/// id. Images present on only one side count as all-fp or all-fn.
pub fn evaluate_detections(preds: &[DetectionDoc], truths: &[TruthDoc], iou_threshold: f64) -> DetectionReport {
    let mut by_image: BTreeMap<&str, (Vec<Detection>, Vec<Truth>)> = BTreeMap::new();
    for doc in preds {
        by_image
            .entry(&doc.image)
            .or_default()
            .0
            .extend(doc.detections.iter().cloned());
    }
    for doc in truths {
        by_image
            .entry(&doc.image)
            .or_default()
            .1
            .extend(doc.truths.iter().cloned());
    }
    let images: Vec<(Vec<Detection>, Vec<Truth>)> = by_image.into_values().collect();

    let mut aggregate = MatchCounts::default();
    let mut per_class: BTreeMap<GarmentClass, MatchCounts> = BTreeMap::new();
    for (p, t) in &images {
        aggregate += match_detections(p, t, iou_threshold);
        for class in GarmentClass::ALL {
            let cp: Vec<Detection> = p.iter().filter(|d| d.garment_class == class).cloned().collect();
            let ct: Vec<Truth> = t.iter().filter(|d| d.garment_class == class).cloned().collect();
            if !cp.is_empty() || !ct.is_empty() {
                *per_class.entry(class).or_default() += match_detections(&cp, &ct, iou_threshold);
            }
        }
    }
    DetectionReport {
        iou_threshold,
        images: images.len(),
        aggregate: aggregate.into(),
        per_class: per_class.into_iter().map(|(c, m)| (c, m.into())).collect(),
        pr_curve: pr_curve_images(&images, iou_threshold),
    }
}

/// Fraction of the first `k` hits that are relevant (divides by `k`).
pub fn precision_at_k<S: AsRef<str>>(hits: &[S], relevant: &HashSet<String>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let found = hits.iter().take(k).filter(|h| relevant.contains(h.as_ref())).count();
    found as f64 / k as f64
}

/// 1 / rank of the first relevant hit, or 0.
pub fn reciprocal_rank<S: AsRef<str>>(hits: &[S], relevant: &HashSet<String>) -> f64 {
    hits.iter()
        .position(|h| relevant.contains(h.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

pub fn mrr<S: AsRef<str>>(queries: &[(Vec<S>, HashSet<String>)]) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    queries.iter().map(|(h, r)| reciprocal_rank(h, r)).sum::<f64>() / queries.len() as f64
}

/// One line of a retrieval runs file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRun {
    pub query: String,
    pub hits: Vec<String>,
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query: String,
    pub precision_at_k: f64,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub k: usize,
    pub queries: usize,
    pub mean_precision_at_k: f64,
    pub mrr: f64,
    pub per_query: Vec<QueryScore>,
}

pub fn evaluate_retrieval(runs: &[RetrievalRun], k: usize) -> RetrievalReport {
    let per_query: Vec<QueryScore> = runs
        .iter()
        .map(|r| {
            let relevant: HashSet<String> = r.relevant.iter().cloned().collect();
            QueryScore {
                query: r.query.clone(),
                precision_at_k: precision_at_k(&r.hits, &relevant, k),
                reciprocal_rank: reciprocal_rank(&r.hits, &relevant),
            }
        })
        .collect();
    let n = per_query.len();
    let mean = |f: fn(&QueryScore) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    RetrievalReport {
        k,
        queries: n,
        mean_precision_at_k: mean(|q| q.precision_at_k),
        mrr: mean(|q| q.reciprocal_rank),
        per_query,
    }
}

/// Parses a runs file: NDJSON, one [`RetrievalRun`] per non-blank line.
pub fn parse_runs(text: &str) -> Result<Vec<RetrievalRun>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
