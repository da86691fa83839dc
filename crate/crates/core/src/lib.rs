//! Visual fashion recommendation core.
//!
//! An outfit image goes through detection post-processing, per-item zero-shot
//! labelling against a garment taxonomy, prompt-guided captioning, and a BM25
//! match query over the catalog cluster named by the assigned label.
//!
//! Model capabilities sit behind the traits in [`providers`]; the
//! [`providers::FixtureSet`] implementation makes every stage reproducible
//! from files.

pub mod catalog;
pub mod eval;
pub mod pipeline;
pub mod providers;
pub mod search;
pub mod taxonomy;
pub mod vision;

pub use catalog::{CatalogStore, IngestReport, ProductRecord};
pub use pipeline::{recommend, PipelineConfig, Recommendations};
pub use providers::{BoundingBox, Detection, Embedding, ImageRef, ProviderBundle};
pub use search::{ClusterIndex, ScoredHit, ScoringParams};
pub use taxonomy::{GarmentClass, Taxonomy};
