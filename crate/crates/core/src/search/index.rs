use std::collections::HashMap;

use super::analyzer::Analyzer;
use super::SearchError;

/// Occurrences of one term in one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub(crate) doc: u32,
    pub(crate) positions: Vec<u32>,
}

impl Posting {
    pub fn term_frequency(&self) -> u32 {
        self.positions.len() as u32
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DocSlot {
    pub(crate) id: String,
    pub(crate) len: u32,
    /// Distinct terms, so an upsert can find the postings to drop.
    pub(crate) terms: Vec<String>,
}

/// Inverted index for one label cluster.
///
/// Documents get an internal ordinal on insertion. Ordinals are never
/// reused, so every posting list stays sorted by ordinal; removed documents
/// leave an empty slot until the index is snapshotted and reloaded.
#[derive(Debug, Clone, Default)]
pub struct ClusterIndex {
    name: String,
    analyzer: Analyzer,
    pub(crate) slots: Vec<Option<DocSlot>>,
    pub(crate) ids: HashMap<String, u32>,
    pub(crate) postings: HashMap<String, Vec<Posting>>,
    total_len: u64,
}

impl ClusterIndex {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_analyzer(name, Analyzer::default())
    }

    pub fn with_analyzer(name: impl Into<String>, analyzer: Analyzer) -> Self {
        Self {
            name: name.into(),
            analyzer,
            ..Self::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    /// Number of live documents (N).
    pub fn doc_count(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Mean document length; 0 for an empty cluster.
    pub fn avgdl(&self) -> f64 {
        if self.ids.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.ids.len() as f64
        }
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.ids.contains_key(doc_id)
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.slot(doc_id).map(|s| s.len)
    }

    /// Document frequency n(t).
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_freq(&self, term: &str, doc_id: &str) -> u32 {
        self.ids
            .get(doc_id)
            .and_then(|&ord| self.posting(term, ord))
            .map_or(0, Posting::term_frequency)
    }

    pub fn positions(&self, term: &str, doc_id: &str) -> &[u32] {
        self.ids
            .get(doc_id)
            .and_then(|&ord| self.posting(term, ord))
            .map_or(&[], |p| p.positions.as_slice())
    }

    /// Live document ids in insertion order.
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().flatten().map(|s| s.id.as_str())
    }

    pub fn vocabulary_len(&self) -> usize {
        self.postings.len()
    }

    /// Indexes `text` under `doc_id`, replacing any previous version.
    pub fn add(&mut self, doc_id: &str, text: &str) -> Result<(), SearchError> {
        let tokens = self.analyzer.analyze(text);
        self.add_tokens(doc_id, &tokens)
    }

    /// Indexes already-analyzed tokens.
    pub fn add_tokens<S: AsRef<str>>(&mut self, doc_id: &str, tokens: &[S]) -> Result<(), SearchError> {
        if doc_id.is_empty() {
            return Err(SearchError::EmptyDocId);
        }
        self.remove(doc_id);

        let ord = u32::try_from(self.slots.len()).map_err(|_| SearchError::IndexFull)?;
        let mut by_term: HashMap<&str, Vec<u32>> = HashMap::new();
        let mut terms = Vec::new();
        for (pos, tok) in tokens.iter().enumerate() {
            let tok = tok.as_ref();
            let entry = by_term.entry(tok).or_insert_with(|| {
                terms.push(tok.to_owned());
                Vec::new()
            });
            entry.push(pos as u32);
        }
        for term in &terms {
            let positions = by_term.remove(term.as_str()).unwrap_or_default();
            self.postings
                .entry(term.clone())
                .or_default()
                .push(Posting { doc: ord, positions });
        }

        let len = tokens.len() as u32;
        self.total_len += u64::from(len);
        self.slots.push(Some(DocSlot {
            id: doc_id.to_owned(),
            len,
            terms,
        }));
        self.ids.insert(doc_id.to_owned(), ord);
        Ok(())
    }

    /// Removes a document. Returns whether it was present.
    pub fn remove(&mut self, doc_id: &str) -> bool {
        let Some(ord) = self.ids.remove(doc_id) else {
            return false;
        };
        let slot = self.slots[ord as usize].take().expect("id map points at a live slot");
        for term in &slot.terms {
            if let Some(list) = self.postings.get_mut(term) {
                if let Ok(i) = list.binary_search_by_key(&ord, |p| p.doc) {
                    list.remove(i);
                }
                if list.is_empty() {
                    self.postings.remove(term);
                }
            }
        }
        self.total_len -= u64::from(slot.len);
        true
    }

    pub(crate) fn slot(&self, doc_id: &str) -> Option<&DocSlot> {
        self.ids.get(doc_id).and_then(|&ord| self.slots[ord as usize].as_ref())
    }

    pub(crate) fn slot_at(&self, ord: u32) -> &DocSlot {
        self.slots[ord as usize]
            .as_ref()
            .expect("postings only reference live slots")
    }

    pub(crate) fn ordinal(&self, doc_id: &str) -> Option<u32> {
        self.ids.get(doc_id).copied()
    }

    pub(crate) fn posting(&self, term: &str, ord: u32) -> Option<&Posting> {
        let list = self.postings.get(term)?;
        list.binary_search_by_key(&ord, |p| p.doc).ok().map(|i| &list[i])
    }

    pub(crate) fn postings_for(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    /// Rebuilds from compacted parts; used by snapshot loading.
    pub(crate) fn from_parts(
        name: String,
        analyzer: Analyzer,
        docs: Vec<(String, u32)>,
        postings: HashMap<String, Vec<Posting>>,
    ) -> Self {
        let mut terms_per_doc: Vec<Vec<String>> = vec![Vec::new(); docs.len()];
        for (term, list) in &postings {
            for p in list {
                terms_per_doc[p.doc as usize].push(term.clone());
            }
        }
        let mut ids = HashMap::with_capacity(docs.len());
        let mut total_len = 0u64;
        let slots = docs
            .into_iter()
            .zip(terms_per_doc)
            .enumerate()
            .map(|(ord, ((id, len), mut terms))| {
                terms.sort();
                ids.insert(id.clone(), ord as u32);
                total_len += u64::from(len);
                Some(DocSlot { id, len, terms })
            })
            .collect();
        Self {
            name,
            analyzer,
            slots,
            ids,
            postings,
            total_len,
        }
    }
}
