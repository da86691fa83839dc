//! Text analysis shared by indexing, querying and cluster routing.
//!
//! Tokens are maximal runs of Unicode letters or digits, lowercased. There is
//! no stemming, and the stopword list is empty unless configured.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Splits `text` into lowercase alphanumeric tokens.
pub fn analyze(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Cluster name for a label: its tokens joined by `_`.
///
/// Returns an empty string when the label has no tokens.
pub fn normalize_label(label: &str) -> String {
    analyze(label).join("_")
}

/// Analyzer with an optional stopword list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyzer {
    #[serde(default)]
    stopwords: BTreeSet<String>,
}

impl Analyzer {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords = words.into_iter().flat_map(|w| analyze(w.as_ref())).collect();
        Self { stopwords }
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        let mut tokens = analyze(text);
        if !self.stopwords.is_empty() {
            tokens.retain(|t| !self.stopwords.contains(t));
        }
        tokens
    }
}
