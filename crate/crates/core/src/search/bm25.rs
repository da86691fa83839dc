//! Okapi BM25 match-query scoring with an optional term-proximity bonus.
//!
//! ```text
//! score(D, Q) = Σ_t IDF(t) · tf·(k1 + 1) / (tf + k1·(1 − b + b·|D|/avgdl))  +  proximity
//! IDF(t)      = ln((N − n(t) + 0.5) / (n(t) + 0.5) + 1)
//! ```
//!
//! The `+ 1` inside the logarithm keeps every IDF positive, so scores are
//! never negative.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::index::ClusterIndex;
use super::SearchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub k1: f64,
    pub b: f64,
    /// Weight of the proximity bonus; 0 disables it.
    #[serde(default)]
    pub proximity_weight: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            proximity_weight: 0.0,
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        let ok = self.k1.is_finite()
            && self.k1 > 0.0
            && (0.0..=1.0).contains(&self.b)
            && self.proximity_weight.is_finite()
            && self.proximity_weight >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SearchError::InvalidParams(*self))
        }
    }
}

/// Per-term breakdown of a hit's score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermExplanation {
    pub term: String,
    pub tf: u32,
    pub idf: f64,
    pub tf_component: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub terms: Vec<TermExplanation>,
    pub proximity_bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub doc_id: String,
    pub score: f64,
    pub explanation: Explanation,
}

/// Non-negative BM25 IDF.
pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_count as f64;
    let df = doc_freq as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Saturated, length-normalised term frequency.
pub fn tf_component(params: &ScoringParams, tf: u32, doc_len: u32, avgdl: f64) -> f64 {
    let tf = f64::from(tf);
    let norm = if avgdl > 0.0 {
        1.0 - params.b + params.b * f64::from(doc_len) / avgdl
    } else {
        1.0
    };
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// Distinct tokens in first-occurrence order.
fn distinct<S: AsRef<str>>(tokens: &[S]) -> Vec<&str> {
    let mut seen = HashSet::new();
    tokens.iter().map(AsRef::as_ref).filter(|t| seen.insert(*t)).collect()
}

/// Smallest |i − j| over two ascending position lists.
fn min_distance(a: &[u32], b: &[u32]) -> Option<u32> {
    let (mut i, mut j) = (0, 0);
    let mut best: Option<u32> = None;
    while i < a.len() && j < b.len() {
        let d = a[i].abs_diff(b[j]);
        best = Some(best.map_or(d, |m| m.min(d)));
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

fn proximity_for_ordinal(idx: &ClusterIndex, params: &ScoringParams, terms: &[&str], ord: u32) -> f64 {
    if params.proximity_weight == 0.0 || terms.len() < 2 {
        return 0.0;
    }
    let present: Vec<&[u32]> = terms
        .iter()
        .filter_map(|t| idx.posting(t, ord))
        .map(|p| p.positions())
        .collect();
    let mut sum = 0.0;
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            if let Some(d) = min_distance(present[i], present[j]) {
                sum += 1.0 / (1.0 + f64::from(d));
            }
        }
    }
    params.proximity_weight * sum
}

fn explain_ordinal(idx: &ClusterIndex, params: &ScoringParams, terms: &[&str], ord: u32) -> ScoredHit {
    let slot = idx.slot_at(ord);
    let n = idx.doc_count();
    let avgdl = idx.avgdl();
    let mut score = 0.0;
    let mut explained = Vec::new();
    for &term in terms {
        let Some(posting) = idx.posting(term, ord) else {
            continue;
        };
        let tf = posting.term_frequency();
        let idf = idf(n, idx.doc_freq(term));
        let tf_component = tf_component(params, tf, slot.len, avgdl);
        let contribution = idf * tf_component;
        score += contribution;
        explained.push(TermExplanation {
            term: term.to_owned(),
            tf,
            idf,
            tf_component,
            contribution,
        });
    }
    let proximity_bonus = proximity_for_ordinal(idx, params, terms, ord);
    ScoredHit {
        doc_id: slot.id.clone(),
        score: score + proximity_bonus,
        explanation: Explanation {
            terms: explained,
            proximity_bonus,
        },
    }
}

/// BM25 score of one document, including the proximity bonus.
pub fn bm25_score<S: AsRef<str>>(
    idx: &ClusterIndex,
    params: &ScoringParams,
    query_tokens: &[S],
    doc_id: &str,
) -> Result<f64, SearchError> {
    Ok(explain(idx, params, query_tokens, doc_id)?.score)
}

/// Scored hit with a per-term breakdown for one document.
pub fn explain<S: AsRef<str>>(
    idx: &ClusterIndex,
    params: &ScoringParams,
    query_tokens: &[S],
    doc_id: &str,
) -> Result<ScoredHit, SearchError> {
    params.validate()?;
    let ord = idx
        .ordinal(doc_id)
        .ok_or_else(|| SearchError::UnknownDoc(doc_id.to_owned()))?;
    Ok(explain_ordinal(idx, params, &distinct(query_tokens), ord))
}

/// Proximity bonus alone: λ · Σ over matched term pairs of 1 / (1 + min distance).
pub fn proximity_bonus<S: AsRef<str>>(
    idx: &ClusterIndex,
    params: &ScoringParams,
    query_tokens: &[S],
    doc_id: &str,
) -> Result<f64, SearchError> {
    params.validate()?;
    let ord = idx
        .ordinal(doc_id)
        .ok_or_else(|| SearchError::UnknownDoc(doc_id.to_owned()))?;
    Ok(proximity_for_ordinal(idx, params, &distinct(query_tokens), ord))
}

/// Total order used for every ranked list: score descending, then doc id.
pub fn rank_order(a: &ScoredHit, b: &ScoredHit) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Match query over one cluster.
pub fn search(
    idx: &ClusterIndex,
    params: &ScoringParams,
    query_text: &str,
    top_k: usize,
) -> Result<Vec<ScoredHit>, SearchError> {
    let tokens = idx.analyzer().analyze(query_text);
    search_tokens(idx, params, &tokens, top_k)
}

pub fn search_tokens<S: AsRef<str>>(
    idx: &ClusterIndex,
    params: &ScoringParams,
    query_tokens: &[S],
    top_k: usize,
) -> Result<Vec<ScoredHit>, SearchError> {
    params.validate()?;
    if top_k == 0 {
        return Err(SearchError::InvalidTopK);
    }
    if query_tokens.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let terms = distinct(query_tokens);
    let n = idx.doc_count();
    let avgdl = idx.avgdl();

    // Same per-term order and arithmetic as `explain_ordinal`, so the
    // accumulated scores are bit-identical to the explained ones.
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for &term in &terms {
        let postings = idx.postings_for(term);
        if postings.is_empty() {
            continue;
        }
        let idf = idf(n, postings.len());
        for p in postings {
            let len = idx.slot_at(p.doc).len;
            let contribution = idf * tf_component(params, p.term_frequency(), len, avgdl);
            *acc.entry(p.doc).or_insert(0.0) += contribution;
        }
    }

    let mut ranked: Vec<(u32, f64)> = acc
        .into_iter()
        .map(|(ord, s)| (ord, s + proximity_for_ordinal(idx, params, &terms, ord)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| idx.slot_at(a.0).id.cmp(&idx.slot_at(b.0).id))
    });
    ranked.truncate(top_k);
    Ok(ranked
        .into_iter()
        .map(|(ord, _)| explain_ordinal(idx, params, &terms, ord))
        .collect())
}

/// Runs the same query over several clusters and merges by [`rank_order`].
pub fn search_merged<'a, I>(
    indexes: I,
    params: &ScoringParams,
    query_text: &str,
    top_k: usize,
) -> Result<Vec<ScoredHit>, SearchError>
where
    I: IntoIterator<Item = &'a ClusterIndex>,
{
    params.validate()?;
    if top_k == 0 {
        return Err(SearchError::InvalidTopK);
    }
    if super::analyze(query_text).is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let mut merged = Vec::new();
    for idx in indexes {
        match search(idx, params, query_text, top_k) {
            Ok(hits) => merged.extend(hits),
            // a cluster-specific stopword list may swallow the whole query
            Err(SearchError::EmptyQuery) => {}
            Err(e) => return Err(e),
        }
    }
    merged.sort_by(rank_order);
    merged.truncate(top_k);
    Ok(merged)
}
