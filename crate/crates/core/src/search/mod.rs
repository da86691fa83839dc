//! In-process match-query engine: analyzer, per-label cluster indexes,
//! BM25 ranking with explanations, and index snapshots.

mod analyzer;
mod bm25;
mod index;
mod snapshot;

pub use analyzer::{analyze, normalize_label, Analyzer};
pub use bm25::{
    bm25_score, explain, idf, proximity_bonus, rank_order, search, search_merged, search_tokens, tf_component,
    Explanation, ScoredHit, ScoringParams, TermExplanation,
};
pub use index::{ClusterIndex, Posting};
pub use snapshot::{snapshot_load, snapshot_save, Snapshot, MAGIC as SNAPSHOT_MAGIC, VERSION as SNAPSHOT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("document id must not be empty")]
    EmptyDocId,
    #[error("unknown document {0:?}")]
    UnknownDoc(String),
    #[error("query has no tokens after analysis")]
    EmptyQuery,
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error("invalid scoring parameters {0:?}")]
    InvalidParams(ScoringParams),
    #[error("cluster index is full")]
    IndexFull,
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
