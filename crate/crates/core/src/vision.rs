//! Zero-shot labelling by cosine similarity, and caption prompt handling.

use serde::{Deserialize, Serialize};

use crate::providers::Embedding;

/// Cosines closer than this are treated as tied and ordered by label.
///
/// Rescaling an embedding perturbs its cosines by a few ulps; without a
/// tolerance, exactly tied candidates could swap places.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VisionError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector{}", .0.as_ref().map(|l| format!(" for label {l:?}")).unwrap_or_default())]
    ZeroVector(Option<String>),
    #[error("no candidate labels")]
    EmptyCandidates,
    #[error("label must not be empty")]
    EmptyLabel,
    #[error("caption is empty after normalization")]
    EmptyCaption,
}

/// Cosine similarity in double precision, clamped to [-1, 1].
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, VisionError> {
    if u.dim() != v.dim() {
        return Err(VisionError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.values().iter().zip(v.values()) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(VisionError::ZeroVector(None));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub label: String,
    pub score: f64,
    /// Every candidate, best first.
    pub ranked: Vec<LabelScore>,
}

/// Picks the candidate label whose embedding is most similar to the image.
///
/// Candidates are ranked by cosine descending; scores within
/// [`TIE_EPSILON`] of their neighbour form a tie group, ordered by label.
pub fn classify(image: &Embedding, candidates: &[(String, Embedding)]) -> Result<ClassificationResult, VisionError> {
    if candidates.is_empty() {
        return Err(VisionError::EmptyCandidates);
    }
    if image.is_zero() {
        return Err(VisionError::ZeroVector(None));
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for (label, emb) in candidates {
        if emb.is_zero() {
            return Err(VisionError::ZeroVector(Some(label.clone())));
        }
        scored.push(LabelScore {
            label: label.clone(),
            score: cosine(image, emb)?,
        });
    }
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.label.cmp(&b.label)));

    let mut ranked = Vec::with_capacity(scored.len());
    let mut group: Vec<LabelScore> = Vec::new();
    for s in scored {
        let chained = group.last().is_some_and(|prev| prev.score - s.score <= TIE_EPSILON);
        if !chained {
            flush(&mut group, &mut ranked);
        }
        group.push(s);
    }
    flush(&mut group, &mut ranked);

    let best = &ranked[0];
    Ok(ClassificationResult {
        label: best.label.clone(),
        score: best.score,
        ranked,
    })
}

fn flush(group: &mut Vec<LabelScore>, out: &mut Vec<LabelScore>) {
    group.sort_by(|a, b| a.label.cmp(&b.label));
    out.append(group);
}

/// Template applied to label text before it is embedded; `{label}` is the
/// placeholder. The default is the bare label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelTemplate(String);

impl LabelTemplate {
    pub fn new(template: impl Into<String>) -> Self {
        Self(template.into())
    }

    pub fn apply(&self, label: &str) -> String {
        self.0.replace("{label}", label)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for LabelTemplate {
    fn default() -> Self {
        Self("{label}".into())
    }
}

pub const CAPTION_PROMPT: &str = "this {label} features";

/// Caption prompt for a label: `this {label} features`.
pub fn build_prompt(label: &str) -> Result<String, VisionError> {
    if label.trim().is_empty() {
        return Err(VisionError::EmptyLabel);
    }
    Ok(CAPTION_PROMPT.replace("{label}", label))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub label: String,
    pub prompt: String,
    /// Generated text with the prompt removed.
    pub body: String,
    pub full_text: String,
}

fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowercases and collapses whitespace, strips an echoed prompt from the
/// generated text, and reassembles `prompt + " " + body`.
pub fn finalize_caption(label: &str, prompt: &str, generated: &str) -> Result<Caption, VisionError> {
    let prompt = normalize_text(prompt);
    let text = normalize_text(generated);
    let body = if prompt.is_empty() {
        text
    } else if text == prompt {
        String::new()
    } else {
        match text.strip_prefix(prompt.as_str()).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) => rest.to_owned(),
            None => text,
        }
    };
    if body.is_empty() {
        return Err(VisionError::EmptyCaption);
    }
    let full_text = if prompt.is_empty() {
        body.clone()
    } else {
        format!("{prompt} {body}")
    };
    Ok(Caption {
        label: normalize_text(label),
        prompt,
        body,
        full_text,
    })
}
