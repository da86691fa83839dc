//! Shared pieces of the acceptance suite: result reporting and the
//! synthetic catalog used by the scale check.

use std::fmt::Write as _;
use std::time::Duration;

use fashionrec::Taxonomy;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct Report {
    pub outcomes: Vec<Outcome>,
}

impl Report {
    pub fn record(&mut self, name: &'static str, pass: bool, detail: impl Into<String>) {
        let o = Outcome {
            name,
            pass,
            detail: detail.into(),
        };
        println!("{} {:<28} {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        self.outcomes.push(o);
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect()
    }
}

/// Value at fraction `q` of the sorted durations (nearest rank).
pub fn percentile(samples: &mut [Duration], q: f64) -> Duration {
    assert!(!samples.is_empty());
    samples.sort();
    let rank = ((q * samples.len() as f64).ceil() as usize).clamp(1, samples.len());
    samples[rank - 1]
}

const COLOURS: &[&str] = &[
    "black", "white", "navy", "blue", "grey", "charcoal", "olive", "khaki", "beige", "cream", "burgundy", "red",
    "green", "teal", "mustard", "rust", "pink", "lilac", "brown", "tan", "ivory", "sand", "coral", "indigo",
];
const MATERIALS: &[&str] = &[
    "cotton",
    "linen",
    "denim",
    "wool",
    "cashmere",
    "silk",
    "satin",
    "jersey",
    "fleece",
    "corduroy",
    "twill",
    "leather",
    "suede",
    "nylon",
    "polyester",
    "chambray",
    "tweed",
    "velvet",
    "canvas",
    "modal",
];
const DETAILS: &[&str] = &[
    "slim",
    "relaxed",
    "oversized",
    "cropped",
    "tapered",
    "straight",
    "wide",
    "fitted",
    "pleated",
    "ribbed",
    "quilted",
    "striped",
    "checked",
    "floral",
    "plain",
    "distressed",
    "washed",
    "raw",
    "stretch",
    "pocket",
    "zip",
    "button",
    "hooded",
    "collar",
    "cuffed",
    "belted",
    "drawstring",
    "embroidered",
    "printed",
    "knit",
    "lightweight",
    "heavyweight",
    "vintage",
    "classic",
    "modern",
    "premium",
    "organic",
    "recycled",
    "tailored",
    "textured",
];
const RETAILERS: &[&str] = &[
    "northwind",
    "lumen apparel",
    "fieldhouse",
    "atelier nine",
    "common thread",
];

/// `n` NDJSON product lines spread over every taxonomy subcategory.
pub fn synthetic_catalog(n: usize, seed: u64) -> String {
    let tax = Taxonomy::default();
    let labels: Vec<&str> = tax.iter().flat_map(|(_, ls)| ls.iter().map(String::as_str)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(n * 220);
    for i in 0..n {
        let label = labels[i % labels.len()];
        let mut words = Vec::new();
        for _ in 0..rng.random_range(4..=9) {
            let pool = match rng.random_range(0..3) {
                0 => COLOURS,
                1 => MATERIALS,
                _ => DETAILS,
            };
            words.push(*pool.choose(&mut rng).unwrap());
        }
        let title = format!(
            "{} {} {label}",
            DETAILS.choose(&mut rng).unwrap(),
            COLOURS.choose(&mut rng).unwrap()
        );
        let _ = writeln!(
            out,
            r#"{{"id":"s{i:06}","label":"{label}","title":"{title}","description":"{}","image_uri":"https://img.example.com/s{i:06}.jpg","retailer":"{}","price":{:.2}}}"#,
            words.join(" "),
            RETAILERS.choose(&mut rng).unwrap(),
            rng.random_range(9.0..400.0),
        );
    }
    out
}

/// Random one-to-three word query drawn from the synthetic vocabulary.
pub fn synthetic_query(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|i| match i {
            0 => *COLOURS.choose(rng).unwrap(),
            1 => *MATERIALS.choose(rng).unwrap(),
            _ => *DETAILS.choose(rng).unwrap(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}
