//! Garment classes produced by the detector and the subcategory labels the
//! zero-shot classifier chooses between.
//!
//! A taxonomy file is a JSON object mapping each of the five class names to
//! a non-empty list of labels:
//!
//! ```json
//! { "trousers": ["jeans", "chinos"], "shorts": ["denim shorts"], ... }
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::search::normalize_label;

/// The shipped default taxonomy.
pub const DEFAULT_TAXONOMY: &str = include_str!("../data/taxonomy.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GarmentClass {
    LongSleeveTop,
    ShortSleeveTop,
    LongSleeveOuterwear,
    Trousers,
    Shorts,
}

impl GarmentClass {
    pub const ALL: [GarmentClass; 5] = [
        GarmentClass::LongSleeveTop,
        GarmentClass::ShortSleeveTop,
        GarmentClass::LongSleeveOuterwear,
        GarmentClass::Trousers,
        GarmentClass::Shorts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GarmentClass::LongSleeveTop => "long_sleeve_top",
            GarmentClass::ShortSleeveTop => "short_sleeve_top",
            GarmentClass::LongSleeveOuterwear => "long_sleeve_outerwear",
            GarmentClass::Trousers => "trousers",
            GarmentClass::Shorts => "shorts",
        }
    }

    /// Human-readable form, e.g. "long sleeve outerwear".
    pub fn display_name(self) -> String {
        self.as_str().replace('_', " ")
    }

    fn position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for GarmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GarmentClass {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GarmentClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| TaxonomyError::UnknownClass(s.to_owned()))
    }
}

/// The five detector classes in canonical order.
pub fn classes() -> [GarmentClass; 5] {
    GarmentClass::ALL
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("taxonomy is missing class {0}")]
    MissingClass(GarmentClass),
    #[error("unknown garment class {0:?}")]
    UnknownClass(String),
    #[error("class {0} has no labels")]
    EmptyClass(GarmentClass),
    #[error("duplicate label {label:?} in class {class}")]
    DuplicateLabel { class: GarmentClass, label: String },
    #[error("label {label:?} in class {class} has no searchable tokens")]
    UnsearchableLabel { class: GarmentClass, label: String },
    #[error("malformed taxonomy: {0}")]
    Malformed(String),
    #[error("cannot read taxonomy: {0}")]
    Io(String),
}

/// Validated class → subcategory mapping. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    entries: [Vec<String>; 5],
}

impl Taxonomy {
    /// Builds a taxonomy from `(class, labels)` pairs, checking every invariant.
    pub fn new<I, L, S>(entries: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (GarmentClass, L)>,
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut slots: [Option<Vec<String>>; 5] = Default::default();
        for (class, labels) in entries {
            slots[class.position()] = Some(labels.into_iter().map(Into::into).collect());
        }
        let mut out: [Vec<String>; 5] = Default::default();
        for class in GarmentClass::ALL {
            let labels = slots[class.position()]
                .take()
                .ok_or(TaxonomyError::MissingClass(class))?;
            if labels.is_empty() {
                return Err(TaxonomyError::EmptyClass(class));
            }
            let mut seen = HashSet::new();
            for label in &labels {
                let key = normalize_label(label);
                if key.is_empty() {
                    return Err(TaxonomyError::UnsearchableLabel {
                        class,
                        label: label.clone(),
                    });
                }
                if !seen.insert(key) {
                    return Err(TaxonomyError::DuplicateLabel {
                        class,
                        label: label.clone(),
                    });
                }
            }
            out[class.position()] = labels;
        }
        Ok(Self { entries: out })
    }

    pub fn subcategories(&self, class: GarmentClass) -> &[String] {
        &self.entries[class.position()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (GarmentClass, &[String])> {
        GarmentClass::ALL.into_iter().map(|c| (c, self.subcategories(c)))
    }

    /// Whether `label` is configured for `class` (compared after normalization).
    pub fn contains(&self, class: GarmentClass, label: &str) -> bool {
        let key = normalize_label(label);
        self.subcategories(class).iter().any(|l| normalize_label(l) == key)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("taxonomy serializes")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TaxonomyError::Io(format!("{}: {e}", path.as_ref().display())))?;
        load_taxonomy(&text)
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        load_taxonomy(DEFAULT_TAXONOMY).expect("shipped taxonomy is valid")
    }
}

impl Serialize for Taxonomy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(5))?;
        for (class, labels) in self.iter() {
            map.serialize_entry(class.as_str(), labels)?;
        }
        map.end()
    }
}

/// Parses and validates a taxonomy document.
pub fn load_taxonomy(source: &str) -> Result<Taxonomy, TaxonomyError> {
    let doc: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(source).map_err(|e| TaxonomyError::Malformed(e.to_string()))?;
    let mut entries = Vec::with_capacity(doc.len());
    for (name, value) in doc {
        let class: GarmentClass = name.parse()?;
        let labels: Vec<String> =
            serde_json::from_value(value).map_err(|e| TaxonomyError::Malformed(format!("{name}: {e}")))?;
        entries.push((class, labels));
    }
    Taxonomy::new(entries)
}
