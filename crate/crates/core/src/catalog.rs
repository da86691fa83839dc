//! Product catalog: NDJSON ingestion, label-cluster routing and persistence.
//!
//! Each catalog line is one JSON object:
//!
//! ```json
//! {"id": "p1", "label": "jeans", "title": "...", "description": "...",
//!  "image_uri": "https://...", "retailer": "...", "price": 49.0}
//! ```
//!
//! `retailer` and `price` are optional; unknown fields are ignored. A record
//! is routed to the cluster named by its normalized label and indexed on
//! `title + " " + description`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::search::{
    normalize_label, search, search_merged, snapshot_load, snapshot_save, ClusterIndex, ScoredHit, ScoringParams,
    SearchError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub image_uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retailer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
}

impl ProductRecord {
    /// Cluster this record is routed to.
    pub fn cluster(&self) -> String {
        normalize_label(&self.label)
    }

    pub fn indexed_text(&self) -> String {
        format!("{} {}", self.title, self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RejectReason {
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::MissingField(_) => "missing_field",
            RejectReason::MalformedRecord(_) => "malformed_record",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the input.
    pub line: usize,
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub clusters_touched: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub name: String,
    pub doc_count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("product {0:?} not found")]
    NotFound(String),
    #[error("cannot read catalog source: {0}")]
    UnreadableSource(#[source] std::io::Error),
    #[error("store at {path} is corrupt: {reason}")]
    CorruptStore { path: String, reason: String },
    #[error("no cluster named {0:?}")]
    UnknownCluster(String),
    #[error(transparent)]
    InvalidRecord(#[from] RejectReason),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn required_str(obj: &serde_json::Map<String, Value>, name: &'static str) -> Result<String, RejectReason> {
    match obj.get(name) {
        None | Some(Value::Null) => Err(RejectReason::MissingField(name)),
        Some(Value::String(s)) if s.trim().is_empty() => Err(RejectReason::MissingField(name)),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(RejectReason::MalformedRecord(format!("{name} must be a string"))),
    }
}

fn optional_str(obj: &serde_json::Map<String, Value>, name: &str) -> Result<Option<String>, RejectReason> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(RejectReason::MalformedRecord(format!("{name} must be a string"))),
    }
}

/// Parses and validates one catalog line.
pub fn parse_record(line: &str) -> Result<ProductRecord, RejectReason> {
    let value: Value = serde_json::from_str(line).map_err(|e| RejectReason::MalformedRecord(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(RejectReason::MalformedRecord("expected a JSON object".into()));
    };
    let id = required_str(&obj, "id")?;
    let label = required_str(&obj, "label")?;
    let title = optional_str(&obj, "title")?.unwrap_or_default();
    let description = optional_str(&obj, "description")?.unwrap_or_default();
    if title.trim().is_empty() && description.trim().is_empty() {
        return Err(RejectReason::MissingField("title"));
    }
    let image_uri = required_str(&obj, "image_uri")?;
    let retailer = optional_str(&obj, "retailer")?;
    let price = match obj.get("price") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => match n.as_f64() {
            Some(p) if p.is_finite() && p >= 0.0 => Some(p),
            _ => {
                return Err(RejectReason::MalformedRecord(
                    "price must be a non-negative number".into(),
                ))
            }
        },
        Some(_) => return Err(RejectReason::MalformedRecord("price must be a number".into())),
    };
    if normalize_label(&label).is_empty() {
        return Err(RejectReason::MalformedRecord(format!("label {label:?} has no tokens")));
    }
    Ok(ProductRecord {
        id,
        label,
        title,
        description,
        image_uri,
        retailer,
        price,
    })
}

/// Records plus one inverted index per label cluster.
///
/// Mutation needs `&mut self`; callers that share a store across threads
/// wrap it in a reader-writer lock.
#[derive(Debug, Clone, Default)]
pub struct CatalogStore {
    records: HashMap<String, ProductRecord>,
    clusters: BTreeMap<String, ClusterIndex>,
}

impl CatalogStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Inserts or replaces a validated record. Returns its cluster name.
    pub fn upsert(&mut self, record: ProductRecord) -> Result<String, CatalogError> {
        let cluster = record.cluster();
        if record.id.trim().is_empty() {
            return Err(RejectReason::MissingField("id").into());
        }
        if cluster.is_empty() {
            return Err(RejectReason::MalformedRecord(format!("label {:?} has no tokens", record.label)).into());
        }
        if let Some(old) = self.records.get(&record.id) {
            let old_cluster = old.cluster();
            if old_cluster != cluster {
                let emptied = self.clusters.get_mut(&old_cluster).is_some_and(|idx| {
                    idx.remove(&record.id);
                    idx.is_empty()
                });
                if emptied {
                    self.clusters.remove(&old_cluster);
                }
            }
        }
        self.clusters
            .entry(cluster.clone())
            .or_insert_with(|| ClusterIndex::new(cluster.clone()))
            .add(&record.id, &record.indexed_text())?;
        self.records.insert(record.id.clone(), record);
        Ok(cluster)
    }

    /// Ingests newline-delimited records. Bad lines are reported and skipped;
    /// blank lines are ignored.
    pub fn ingest<R: BufRead>(&mut self, source: R) -> Result<IngestReport, CatalogError> {
        self.ingest_inner(source, None::<&mut Vec<u8>>)
    }

    /// Like [`ingest`](Self::ingest), also appending every accepted line to `log`.
    pub fn ingest_logged<R: BufRead, W: Write>(
        &mut self,
        source: R,
        log: &mut W,
    ) -> Result<IngestReport, CatalogError> {
        self.ingest_inner(source, Some(log))
    }

    fn ingest_inner<R: BufRead, W: Write>(
        &mut self,
        source: R,
        mut log: Option<&mut W>,
    ) -> Result<IngestReport, CatalogError> {
        let mut report = IngestReport::default();
        for (i, line) in source.lines().enumerate() {
            let line = line.map_err(CatalogError::UnreadableSource)?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            match parse_record(trimmed) {
                Ok(record) => {
                    let cluster = self.upsert(record)?;
                    if let Some(log) = log.as_mut() {
                        writeln!(log, "{trimmed}")?;
                    }
                    report.accepted += 1;
                    report.clusters_touched.insert(cluster);
                }
                Err(reason) => report.rejected.push(Rejection {
                    line: i + 1,
                    code: reason.code().to_owned(),
                    reason: reason.to_string(),
                }),
            }
        }
        Ok(report)
    }

    pub fn ingest_str(&mut self, text: &str) -> Result<IngestReport, CatalogError> {
        self.ingest(text.as_bytes())
    }

    pub fn get(&self, id: &str) -> Result<&ProductRecord, CatalogError> {
        self.records
            .get(id)
            .ok_or_else(|| CatalogError::NotFound(id.to_owned()))
    }

    /// Non-empty clusters with their document counts, by name.
    pub fn list_clusters(&self) -> Vec<ClusterInfo> {
        self.clusters
            .values()
            .filter(|c| !c.is_empty())
            .map(|c| ClusterInfo {
                name: c.name().to_owned(),
                doc_count: c.doc_count(),
            })
            .collect()
    }

    pub fn cluster(&self, name: &str) -> Option<&ClusterIndex> {
        self.clusters.get(name)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ClusterIndex> {
        self.clusters.values()
    }

    pub fn records(&self) -> impl Iterator<Item = &ProductRecord> {
        self.records.values()
    }

    /// Match query routed to one cluster, or across all clusters when
    /// `cluster` is `None`. A named cluster that is absent or empty falls
    /// back to all clusters when `fallback` is set.
    pub fn search(
        &self,
        cluster: Option<&str>,
        params: &ScoringParams,
        query: &str,
        top_k: usize,
        fallback: bool,
    ) -> Result<RoutedSearch, CatalogError> {
        let routed = cluster.map(normalize_label);
        let target = routed
            .as_deref()
            .and_then(|c| self.clusters.get(c))
            .filter(|c| !c.is_empty());
        let (hits, fell_back) = match (&routed, target) {
            (Some(_), Some(idx)) => (search(idx, params, query, top_k)?, false),
            (Some(name), None) if !fallback => return Err(CatalogError::UnknownCluster(name.clone())),
            (Some(_), None) => (search_merged(self.clusters.values(), params, query, top_k)?, true),
            (None, _) => (search_merged(self.clusters.values(), params, query, top_k)?, false),
        };
        Ok(RoutedSearch {
            cluster: routed,
            fallback: fell_back,
            hits,
        })
    }

    /// Writes `records.ndjson`, one snapshot per cluster under `clusters/`,
    /// and a `manifest.json` tying them together.
    pub fn save(&self, dir: impl AsRef<Path>, params: &ScoringParams) -> Result<(), CatalogError> {
        let dir = dir.as_ref();
        let cluster_dir = dir.join("clusters");
        if cluster_dir.exists() {
            fs::remove_dir_all(&cluster_dir)?;
        }
        fs::create_dir_all(&cluster_dir)?;

        let mut ids: Vec<&String> = self.records.keys().collect();
        ids.sort();
        let mut out = std::io::BufWriter::new(fs::File::create(dir.join("records.ndjson"))?);
        for id in ids {
            serde_json::to_writer(&mut out, &self.records[id]).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;

        for idx in self.clusters.values() {
            let file = fs::File::create(cluster_dir.join(format!("{}.snap", idx.name())))?;
            snapshot_save(idx, params, std::io::BufWriter::new(file))?;
        }
        let manifest = Manifest {
            version: 1,
            records: self.records.len(),
            clusters: self.list_clusters(),
        };
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::from)?,
        )?;
        Ok(())
    }

    /// Loads a directory written by [`save`](Self::save). Returns the store
    /// and the scoring parameters recorded in its snapshots.
    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, ScoringParams), CatalogError> {
        let dir = dir.as_ref();
        let corrupt = |reason: String| CatalogError::CorruptStore {
            path: dir.display().to_string(),
            reason,
        };
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)
            .map_err(|e| corrupt(format!("manifest: {e}")))?;

        let mut store = CatalogStore::new();
        let reader = BufReader::new(fs::File::open(dir.join("records.ndjson"))?);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ProductRecord = serde_json::from_str(&line).map_err(|e| corrupt(format!("records: {e}")))?;
            store.records.insert(rec.id.clone(), rec);
        }
        if store.records.len() != manifest.records {
            return Err(corrupt("record count differs from manifest".into()));
        }

        let mut params = ScoringParams::default();
        for info in &manifest.clusters {
            let file = fs::File::open(dir.join("clusters").join(format!("{}.snap", info.name)))?;
            let snap = snapshot_load(BufReader::new(file))?;
            if snap.index.name() != info.name || snap.index.doc_count() != info.doc_count {
                return Err(corrupt(format!("cluster {} disagrees with manifest", info.name)));
            }
            params = snap.params;
            store.clusters.insert(info.name.clone(), snap.index);
        }
        for rec in store.records.values() {
            let ok = store.clusters.get(&rec.cluster()).is_some_and(|c| c.contains(&rec.id));
            if !ok {
                return Err(corrupt(format!("record {:?} missing from its cluster", rec.id)));
            }
        }
        Ok((store, params))
    }

    /// Rebuilds a store by replaying an append-only catalog log.
    pub fn rebuild_from_log(path: impl AsRef<Path>) -> Result<(Self, IngestReport), CatalogError> {
        let file = fs::File::open(path).map_err(CatalogError::UnreadableSource)?;
        let mut store = CatalogStore::new();
        let report = store.ingest(BufReader::new(file))?;
        Ok((store, report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedSearch {
    /// Normalized cluster name, when one was requested.
    pub cluster: Option<String>,
    pub fallback: bool,
    pub hits: Vec<ScoredHit>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    records: usize,
    clusters: Vec<ClusterInfo>,
}
