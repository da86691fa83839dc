//! Versioned, checksummed snapshot files for a [`ClusterIndex`].
//!
//! Byte layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `FRECSNAP`                        |
//! | 8      | 4    | format version (`u32`, currently 1)     |
//! | 12     | 8    | payload length in bytes (`u64`)         |
//! | 20     | 32   | SHA-256 of the payload                  |
//! | 52     | len  | payload: UTF-8 JSON, see [`Payload`]    |
//!
//! Documents are renumbered densely on save, so a reloaded index has no
//! empty slots left over from upserts.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analyzer::Analyzer;
use super::bm25::ScoringParams;
use super::index::{ClusterIndex, Posting};
use super::SearchError;

pub const MAGIC: &[u8; 8] = b"FRECSNAP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

/// term → `[(ordinal, positions)]`
type Postings = Vec<(String, Vec<(u32, Vec<u32>)>)>;

#[derive(Debug, Serialize, Deserialize)]
struct Payload {
    cluster: String,
    analyzer: Analyzer,
    params: ScoringParams,
    /// `(doc_id, length)` in dense ordinal order.
    docs: Vec<(String, u32)>,
    /// term → `[(ordinal, positions)]`, ordinals ascending; tf = positions.len().
    postings: Postings,
}

/// A loaded snapshot: the index plus the scoring parameters saved with it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub index: ClusterIndex,
    pub params: ScoringParams,
}

fn corrupt(msg: impl Into<String>) -> SearchError {
    SearchError::CorruptSnapshot(msg.into())
}

pub fn snapshot_save<W: Write>(idx: &ClusterIndex, params: &ScoringParams, mut sink: W) -> Result<(), SearchError> {
    let mut remap: HashMap<u32, u32> = HashMap::with_capacity(idx.doc_count());
    let mut docs = Vec::with_capacity(idx.doc_count());
    for (ord, slot) in idx.slots.iter().enumerate() {
        if let Some(slot) = slot {
            remap.insert(ord as u32, docs.len() as u32);
            docs.push((slot.id.clone(), slot.len));
        }
    }
    let mut postings: Postings = idx
        .postings
        .iter()
        .map(|(term, list)| {
            let entries = list.iter().map(|p| (remap[&p.doc], p.positions.clone())).collect();
            (term.clone(), entries)
        })
        .collect();
    postings.sort_by(|a, b| a.0.cmp(&b.0));

    let payload = Payload {
        cluster: idx.name().to_owned(),
        analyzer: idx.analyzer().clone(),
        params: *params,
        docs,
        postings,
    };
    let bytes = serde_json::to_vec(&payload).map_err(|e| corrupt(e.to_string()))?;
    let digest = Sha256::digest(&bytes);

    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    sink.write_all(&(bytes.len() as u64).to_le_bytes())?;
    sink.write_all(&digest)?;
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(())
}

pub fn snapshot_load<R: Read>(mut source: R) -> Result<Snapshot, SearchError> {
    let mut raw = Vec::new();
    source.read_to_end(&mut raw)?;
    if raw.len() < HEADER_LEN {
        return Err(corrupt("truncated header"));
    }
    if &raw[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(raw[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(raw[12..20].try_into().expect("8 bytes"));
    let body = &raw[HEADER_LEN..];
    if body.len() as u64 != len {
        return Err(corrupt(format!(
            "payload length {} does not match header {len}",
            body.len()
        )));
    }
    if Sha256::digest(body).as_slice() != &raw[20..52] {
        return Err(corrupt("checksum mismatch"));
    }
    let payload: Payload = serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))?;
    let params = payload.params;
    let index = rebuild(payload)?;
    Ok(Snapshot { index, params })
}

fn rebuild(payload: Payload) -> Result<ClusterIndex, SearchError> {
    let n = payload.docs.len();
    let mut seen_len = vec![0u32; n];
    let mut postings = HashMap::with_capacity(payload.postings.len());
    for (term, entries) in payload.postings {
        if entries.is_empty() {
            return Err(corrupt(format!("empty posting list for {term:?}")));
        }
        let mut list = Vec::with_capacity(entries.len());
        let mut prev: Option<u32> = None;
        for (doc, positions) in entries {
            if doc as usize >= n || prev.is_some_and(|p| p >= doc) {
                return Err(corrupt(format!("bad ordinal {doc} for {term:?}")));
            }
            if positions.is_empty() {
                return Err(corrupt(format!("posting without positions for {term:?}")));
            }
            prev = Some(doc);
            seen_len[doc as usize] += positions.len() as u32;
            list.push(Posting { doc, positions });
        }
        if postings.insert(term.clone(), list).is_some() {
            return Err(corrupt(format!("duplicate term {term:?}")));
        }
    }
    let mut ids = std::collections::HashSet::with_capacity(n);
    for ((id, len), seen) in payload.docs.iter().zip(&seen_len) {
        if *len != *seen {
            return Err(corrupt(format!("length of {id:?} disagrees with postings")));
        }
        if id.is_empty() || !ids.insert(id.as_str()) {
            return Err(corrupt(format!("bad or duplicate doc id {id:?}")));
        }
    }
    Ok(ClusterIndex::from_parts(
        payload.cluster,
        payload.analyzer,
        payload.docs,
        postings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::bm25::{bm25_score, search};

    fn sample() -> ClusterIndex {
        let mut idx = ClusterIndex::new("jeans");
        idx.add("p1", "slim faded blue denim").unwrap();
        idx.add("p2", "relaxed black denim with rips").unwrap();
        idx.add("p3", "temporary").unwrap();
        idx.add("p3", "bootcut indigo stretch denim denim").unwrap();
        idx
    }

    #[test]
    fn round_trip_preserves_scores() {
        let idx = sample();
        let params = ScoringParams {
            proximity_weight: 0.5,
            ..ScoringParams::default()
        };
        let mut buf = Vec::new();
        snapshot_save(&idx, &params, &mut buf).unwrap();
        let snap = snapshot_load(buf.as_slice()).unwrap();
        assert_eq!(snap.params, params);
        assert_eq!(snap.index.name(), "jeans");
        assert_eq!(snap.index.doc_count(), 3);
        for q in ["denim", "blue denim", "indigo stretch", "rips black slim"] {
            assert_eq!(
                search(&idx, &params, q, 10).unwrap(),
                search(&snap.index, &params, q, 10).unwrap()
            );
        }
        let toks = ["denim", "blue"];
        for d in ["p1", "p2", "p3"] {
            assert_eq!(
                bm25_score(&idx, &params, &toks, d).unwrap(),
                bm25_score(&snap.index, &params, &toks, d).unwrap()
            );
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut buf = Vec::new();
        snapshot_save(&sample(), &ScoringParams::default(), &mut buf).unwrap();
        for cut in [0, 10, HEADER_LEN, buf.len() - 1] {
            let err = snapshot_load(&buf[..cut]).unwrap_err();
            assert!(matches!(err, SearchError::CorruptSnapshot(_)), "cut {cut}: {err:?}");
        }
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let mut buf = Vec::new();
        snapshot_save(&sample(), &ScoringParams::default(), &mut buf).unwrap();
        let last = buf.len() - 5;
        buf[last] ^= 0x20;
        assert!(
            matches!(snapshot_load(buf.as_slice()), Err(SearchError::CorruptSnapshot(m)) if m.contains("checksum"))
        );
    }

    #[test]
    fn wrong_version() {
        let mut buf = Vec::new();
        snapshot_save(&sample(), &ScoringParams::default(), &mut buf).unwrap();
        buf[8] = 9;
        assert!(matches!(snapshot_load(buf.as_slice()), Err(SearchError::CorruptSnapshot(m)) if m.contains("version")));
    }

    #[test]
    fn empty_index_round_trip() {
        let idx = ClusterIndex::new("nothing");
        let mut buf = Vec::new();
        snapshot_save(&idx, &ScoringParams::default(), &mut buf).unwrap();
        let snap = snapshot_load(buf.as_slice()).unwrap();
        assert_eq!(snap.index.doc_count(), 0);
        assert!(search(&snap.index, &ScoringParams::default(), "blue", 5)
            .unwrap()
            .is_empty());
    }
}
