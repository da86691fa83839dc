//! Reference implementations written straight from the formulas, plus seeded
//! instance generators. Nothing here calls into the scoring code under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fashionrec::{BoundingBox, ClusterIndex, Detection, Embedding, GarmentClass};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore};

// ---------------------------------------------------------------- bm25

#[derive(Debug, Clone)]
pub struct Bm25Case {
    /// Final corpus state after all upserts and removals.
    pub docs: BTreeMap<String, Vec<String>>,
    pub index: ClusterIndex,
    pub query: Vec<String>,
    pub k1: f64,
    pub b: f64,
    pub lambda: f64,
}

/// Random corpus (at most 30 docs, vocabulary at most 20, length at most 12)
/// built through a mix of adds, re-adds and removals.
pub fn bm25_case(rng: &mut impl RngCore, with_proximity: bool) -> Bm25Case {
    let vocab: Vec<String> = (0..rng.random_range(1..=20)).map(|i| format!("w{i}")).collect();
    let n_docs = rng.random_range(1..=30);
    let mut docs = BTreeMap::new();
    let mut index = ClusterIndex::new("oracle");
    let random_doc = |rng: &mut dyn RngCore| -> Vec<String> {
        let len = rng.random_range(0..=12);
        (0..len).map(|_| vocab.choose(rng).unwrap().clone()).collect()
    };
    let mut ids: Vec<String> = (0..n_docs).map(|i| format!("d{i:02}")).collect();
    ids.shuffle(rng);
    for id in &ids {
        let toks = random_doc(rng);
        index.add(id, &toks.join(" ")).unwrap();
        docs.insert(id.clone(), toks);
    }
    for _ in 0..rng.random_range(0..=4) {
        let id = ids.choose(rng).unwrap().clone();
        if rng.random_bool(0.5) {
            let toks = random_doc(rng);
            index.add(&id, &toks.join(" ")).unwrap();
            docs.insert(id, toks);
        } else if docs.len() > 1 {
            index.remove(&id);
            docs.remove(&id);
        }
    }
    let mut query: Vec<String> = (0..rng.random_range(1..=5))
        .map(|_| vocab.choose(rng).unwrap().clone())
        .collect();
    if rng.random_bool(0.2) {
        query.push("absent".into());
    }
    Bm25Case {
        docs,
        index,
        query,
        k1: if rng.random_bool(0.5) {
            1.2
        } else {
            rng.random_range(0.1..3.0)
        },
        b: if rng.random_bool(0.5) {
            0.75
        } else {
            rng.random_range(0.0..=1.0)
        },
        lambda: if with_proximity {
            rng.random_range(0.0..2.0)
        } else {
            0.0
        },
    }
}

/// Scores straight from the formula: distinct query tokens in first-seen
/// order, Lucene-style IDF, plus the pairwise proximity bonus.
pub fn bm25_oracle(
    docs: &BTreeMap<String, Vec<String>>,
    query: &[String],
    k1: f64,
    b: f64,
    lambda: f64,
) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let total: usize = docs.values().map(Vec::len).sum();
    let avgdl = total as f64 / n;
    let mut distinct: Vec<&String> = Vec::new();
    for t in query {
        if !distinct.contains(&t) {
            distinct.push(t);
        }
    }
    let mut out = Vec::new();
    for (id, toks) in docs {
        let mut score = 0.0;
        for t in &distinct {
            let tf = toks.iter().filter(|x| x == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.values().filter(|d| d.contains(t)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            let norm = if avgdl > 0.0 {
                1.0 - b + b * toks.len() as f64 / avgdl
            } else {
                1.0
            };
            score += idf * (tf * (k1 + 1.0) / (tf + k1 * norm));
        }
        let mut prox = 0.0;
        if lambda > 0.0 {
            let present: Vec<Vec<usize>> = distinct
                .iter()
                .map(|t| {
                    toks.iter()
                        .enumerate()
                        .filter(|(_, x)| x == t)
                        .map(|(i, _)| i)
                        .collect::<Vec<_>>()
                })
                .filter(|p| !p.is_empty())
                .collect();
            for i in 0..present.len() {
                for j in i + 1..present.len() {
                    let mut best = usize::MAX;
                    for &p in &present[i] {
                        for &q in &present[j] {
                            best = best.min(p.abs_diff(q));
                        }
                    }
                    prox += 1.0 / (1.0 + best as f64);
                }
            }
        }
        let score = score + lambda * prox;
        if score > 0.0 {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

// ---------------------------------------------------------------- classifier

pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ClassifyCase {
    pub image: Vec<f64>,
    pub candidates: Vec<(String, Vec<f64>)>,
}

impl ClassifyCase {
    pub fn embeddings(&self) -> (Embedding, Vec<(String, Embedding)>) {
        (
            Embedding::new(self.image.clone()).unwrap(),
            self.candidates
                .iter()
                .map(|(l, v)| (l.clone(), Embedding::new(v.clone()).unwrap()))
                .collect(),
        )
    }
}

fn gaussian_vec(rng: &mut impl RngCore, dim: usize) -> Vec<f64> {
    loop {
        // Box-Muller; reject the all-zero vector
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

/// Random instance (dim at most 64, at most 50 candidates). Roughly a third of
/// candidates are engineered ties: exact copies, positive multiples of
/// another candidate, or multiples of the image itself.
pub fn classify_case(rng: &mut impl RngCore) -> ClassifyCase {
    let dim = rng.random_range(1..=64);
    let n = rng.random_range(1..=50);
    let image = gaussian_vec(rng, dim);
    let mut labels: Vec<String> = (0..n).map(|i| format!("label{i:02}")).collect();
    labels.shuffle(rng);
    let mut candidates: Vec<(String, Vec<f64>)> = Vec::with_capacity(n);
    for label in labels {
        let v = match rng.random_range(0..6) {
            0 if !candidates.is_empty() => candidates.choose(rng).unwrap().1.clone(),
            1 if !candidates.is_empty() => {
                let s = rng.random_range(0.01..100.0);
                candidates.choose(rng).unwrap().1.iter().map(|x| x * s).collect()
            }
            2 if rng.random_bool(0.3) => {
                let s = rng.random_range(0.5..5.0);
                image.iter().map(|x| x * s).collect()
            }
            _ => gaussian_vec(rng, dim),
        };
        candidates.push((label, v));
    }
    ClassifyCase { image, candidates }
}

/// Direct cosine, sort, then order each tie component by label. Components
/// are the connected pieces of the "within TIE_EPS" relation (union-find
/// over all pairs).
pub fn classify_oracle(image: &[f64], candidates: &[(String, Vec<f64>)]) -> Vec<(String, f64)> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|(_, v)| {
            let dot: f64 = image.iter().zip(v).map(|(a, b)| a * b).sum();
            (dot / (norm(image) * norm(v))).clamp(-1.0, 1.0)
        })
        .collect();
    let n = scores.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (scores[i] - scores[j]).abs() <= TIE_EPS {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        comps.entry(r).or_default().push(i);
    }
    let mut comps: Vec<Vec<usize>> = comps.into_values().collect();
    let top = |c: &Vec<usize>| c.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
    comps.sort_by(|a, b| top(b).total_cmp(&top(a)));
    let mut out = Vec::with_capacity(n);
    for mut c in comps {
        c.sort_by(|&a, &b| candidates[a].0.cmp(&candidates[b].0));
        out.extend(c.into_iter().map(|i| (candidates[i].0.clone(), scores[i])));
    }
    out
}

// ---------------------------------------------------------------- metrics

/// Integer-grid box; the oracle measures areas by counting unit cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBox(pub [i32; 4]);

impl GridBox {
    pub fn to_box(self) -> BoundingBox {
        self.0.map(f64::from).try_into().unwrap()
    }

    fn cells(self) -> impl Iterator<Item = (i32, i32)> {
        let [x1, y1, x2, y2] = self.0;
        (x1..x2).flat_map(move |x| (y1..y2).map(move |y| (x, y)))
    }

    fn covers(self, (x, y): (i32, i32)) -> bool {
        let [x1, y1, x2, y2] = self.0;
        x >= x1 && x < x2 && y >= y1 && y < y2
    }
}

pub fn iou_oracle(a: GridBox, b: GridBox) -> f64 {
    let inter = a.cells().filter(|&c| b.covers(c)).count();
    let union = a.cells().count() + b.cells().count() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone)]
pub struct GridPred {
    pub class: GarmentClass,
    pub confidence: f64,
    pub bx: GridBox,
}

impl GridPred {
    pub fn to_detection(&self) -> Detection {
        Detection {
            garment_class: self.class,
            confidence: self.confidence,
            bbox: self.bx.to_box(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricsCase {
    pub preds: Vec<GridPred>,
    pub truths: Vec<(GarmentClass, GridBox)>,
    pub iou_threshold: f64,
}

fn grid_box(rng: &mut impl RngCore) -> GridBox {
    let x1 = rng.random_range(0..30);
    let y1 = rng.random_range(0..30);
    GridBox([x1, y1, x1 + rng.random_range(1..12), y1 + rng.random_range(1..12)])
}

fn jitter(rng: &mut impl RngCore, b: GridBox) -> GridBox {
    let [x1, y1, x2, y2] = b.0;
    let nx1 = (x1 + rng.random_range(-1..=1)).max(0);
    let ny1 = (y1 + rng.random_range(-1..=1)).max(0);
    GridBox([
        nx1,
        ny1,
        (x2 + rng.random_range(-1..=1)).max(nx1 + 1),
        (y2 + rng.random_range(-1..=1)).max(ny1 + 1),
    ])
}

/// At most 20 boxes per side; predictions are mostly jittered truths, drawn
/// from a few classes and a coarse confidence grid so ties occur.
pub fn metrics_case(rng: &mut impl RngCore) -> MetricsCase {
    let classes = &GarmentClass::ALL[..rng.random_range(1..=5)];
    let truths: Vec<(GarmentClass, GridBox)> = (0..rng.random_range(0..=20))
        .map(|_| (*classes.choose(rng).unwrap(), grid_box(rng)))
        .collect();
    let preds = (0..rng.random_range(0..=20))
        .map(|_| {
            let (class, bx) = if !truths.is_empty() && rng.random_bool(0.7) {
                let (c, b) = *truths.choose(rng).unwrap();
                let c = if rng.random_bool(0.1) {
                    *classes.choose(rng).unwrap()
                } else {
                    c
                };
                (c, jitter(rng, b))
            } else {
                (*classes.choose(rng).unwrap(), grid_box(rng))
            };
            GridPred {
                class,
                confidence: f64::from(rng.random_range(1..=10u8)) / 10.0,
                bx,
            }
        })
        .collect();
    MetricsCase {
        preds,
        truths,
        iou_threshold: [0.3, 0.5, 0.75][rng.random_range(0..3)],
    }
}

/// (tp, fp, fn) by greedy matching: predictions in (confidence desc, x1, y1,
/// x2, y2, class) order each claim the free same-class truth of highest IoU,
/// earliest truth on ties.
pub fn match_oracle(preds: &[GridPred], truths: &[(GarmentClass, GridBox)], thr: f64) -> (usize, usize, usize) {
    let class_rank = |c: GarmentClass| GarmentClass::ALL.iter().position(|x| *x == c).unwrap();
    let mut order: Vec<&GridPred> = preds.iter().collect();
    order.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then(a.bx.0[0].cmp(&b.bx.0[0]))
            .then(a.bx.0[1].cmp(&b.bx.0[1]))
            .then(a.bx.0[2].cmp(&b.bx.0[2]))
            .then(a.bx.0[3].cmp(&b.bx.0[3]))
            .then(class_rank(a.class).cmp(&class_rank(b.class)))
    });
    let mut free = vec![true; truths.len()];
    let mut tp = 0;
    for p in order {
        let best = truths
            .iter()
            .enumerate()
            .filter(|(i, t)| free[*i] && t.0 == p.class)
            .map(|(i, t)| (i, iou_oracle(p.bx, t.1)))
            .filter(|(_, v)| *v >= thr)
            .fold(None::<(usize, f64)>, |acc, (i, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            });
        if let Some((i, _)) = best {
            free[i] = false;
            tp += 1;
        }
    }
    (tp, preds.len() - tp, truths.len() - tp)
}

/// Precision, recall and F1 by the textbook definitions.
pub fn prf_oracle(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// (threshold, precision, recall) at every distinct confidence, descending.
pub fn pr_curve_oracle(preds: &[GridPred], truths: &[(GarmentClass, GridBox)], thr: f64) -> Vec<(f64, f64, f64)> {
    let mut confs: Vec<f64> = preds.iter().map(|p| p.confidence).collect();
    confs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    confs.dedup();
    confs
        .into_iter()
        .map(|c| {
            let kept: Vec<GridPred> = preds.iter().filter(|p| p.confidence >= c).cloned().collect();
            let (tp, fp, fn_) = match_oracle(&kept, truths, thr);
            let (p, r, _) = prf_oracle(tp, fp, fn_);
            (c, p, r)
        })
        .collect()
}
