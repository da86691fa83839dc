use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use fashionrec::catalog::CatalogStore;
use fashionrec::eval::evaluate_retrieval;
use fashionrec::pipeline::{GroupOutcome, RecommendStatus};
use fashionrec::providers::{DetectionDoc, EmbeddingsDoc, FixtureSet};
use fashionrec::search::normalize_label;
use fashionrec::{recommend, GarmentClass, PipelineConfig, ProviderBundle, Recommendations, Taxonomy};

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")
}

fn store() -> CatalogStore {
    let mut s = CatalogStore::new();
    let text = std::fs::read_to_string(demo().join("catalog.ndjson")).unwrap();
    let report = s.ingest_str(&text).unwrap();
    assert!(report.rejected.is_empty());
    s
}

fn relevance() -> BTreeMap<String, Vec<String>> {
    serde_json::from_str(&std::fs::read_to_string(demo().join("relevance.json")).unwrap()).unwrap()
}

fn run_all(set: &Arc<FixtureSet>, store: &CatalogStore, cfg: &PipelineConfig) -> Vec<Recommendations> {
    let providers = ProviderBundle::from_fixtures(set.clone());
    let tax = Taxonomy::default();
    set.image_ids()
        .map(|id| recommend(&set.image(id).unwrap(), &providers, &tax, store, cfg).unwrap())
        .collect()
}

#[test]
fn two_item_outfit() {
    let set = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let recs = run_all(&set, &store(), &PipelineConfig::default());
    let first = &recs[0];
    assert_eq!(first.image, "img_001");
    assert_eq!(first.groups.len(), 2);
    let g = first.groups[0].group().unwrap();
    assert_eq!(g.detection.garment_class, GarmentClass::Trousers);
    let trousers = Taxonomy::default().subcategories(GarmentClass::Trousers).to_vec();
    assert!(trousers.iter().any(|l| normalize_label(l) == g.cluster));
    assert_eq!(g.crop_key, "img_001_crop0");
    assert!(g.query_text.starts_with(&g.assigned_label));
    assert!(!g.query_text.contains("features"));
}

#[test]
fn planted_products_fill_the_top_three() {
    let set = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let recs = run_all(&set, &store(), &PipelineConfig::default());
    let rel = relevance();
    let mut groups = 0;
    for r in &recs {
        assert_eq!(r.status, RecommendStatus::Ok);
        for outcome in &r.groups {
            let g = outcome.group().expect("fixture groups succeed");
            groups += 1;
            assert!(!g.fallback);
            let top3: Vec<&str> = g.hits.iter().take(3).map(|h| h.product.id.as_str()).collect();
            for id in &rel[&g.crop_key] {
                assert!(top3.contains(&id.as_str()), "{} missing {id} in {top3:?}", g.crop_key);
            }
            for h in &g.hits {
                assert_eq!(normalize_label(&h.product.label), g.cluster);
            }
            for w in g.hits.windows(2) {
                assert!(w[0].score >= w[1].score);
            }
        }
    }
    assert_eq!(groups, rel.len());
    let runs: Vec<_> = recs.iter().flat_map(|r| r.retrieval_runs(&rel)).collect();
    let report = evaluate_retrieval(&runs, 3);
    assert_eq!(report.mean_precision_at_k, 1.0);
    assert_eq!(report.mrr, 1.0);
}

#[test]
fn duplicate_and_faint_boxes_are_dropped() {
    let set = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let recs = run_all(&set, &store(), &PipelineConfig::default());
    // img_002 carries a near-duplicate jacket box, img_004 a faint extra top
    assert_eq!(recs[1].groups.len(), 2);
    assert_eq!(recs[3].groups.len(), 2);
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let set = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let store = store();
    let serial = serde_json::to_string(&run_all(&set, &store, &PipelineConfig::default())).unwrap();
    let parallel = PipelineConfig {
        parallelism: 4,
        ..PipelineConfig::default()
    };
    assert_eq!(
        serial,
        serde_json::to_string(&run_all(&set, &store, &parallel)).unwrap()
    );
    let reloaded = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    assert_eq!(
        serial,
        serde_json::to_string(&run_all(&reloaded, &store, &PipelineConfig::default())).unwrap()
    );
}

fn docs_without_caption(drop: &str) -> FixtureSet {
    let dir = demo();
    let mut docs = Vec::new();
    for e in std::fs::read_dir(dir.join("detections")).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        docs.push(serde_json::from_str::<DetectionDoc>(&text).unwrap());
    }
    let emb: EmbeddingsDoc =
        serde_json::from_str(&std::fs::read_to_string(dir.join("embeddings.json")).unwrap()).unwrap();
    let mut caps: HashMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("captions.json")).unwrap()).unwrap();
    caps.remove(drop);
    FixtureSet::from_docs(docs, emb, caps).unwrap()
}

#[test]
fn missing_caption_only_fails_its_own_group() {
    let store = store();
    let cfg = PipelineConfig::default();
    let tax = Taxonomy::default();
    let full = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let partial = Arc::new(docs_without_caption("img_001_crop1"));
    let img = full.image("img_001").unwrap();
    let a = recommend(&img, &ProviderBundle::from_fixtures(full), &tax, &store, &cfg).unwrap();
    let b = recommend(&img, &ProviderBundle::from_fixtures(partial), &tax, &store, &cfg).unwrap();
    assert_eq!(a.groups[0], b.groups[0]);
    match &b.groups[1] {
        GroupOutcome::Error(f) => {
            assert_eq!(f.error.code, "missing_caption");
            assert_eq!(f.crop_key, "img_001_crop1");
        }
        other => panic!("expected error group, got {other:?}"),
    }
}

#[test]
fn nothing_above_threshold() {
    let set = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let cfg = PipelineConfig {
        confidence_threshold: 0.99,
        ..PipelineConfig::default()
    };
    let r = recommend(
        &set.image("img_001").unwrap(),
        &ProviderBundle::from_fixtures(set.clone()),
        &Taxonomy::default(),
        &store(),
        &cfg,
    )
    .unwrap();
    assert_eq!(r.status, RecommendStatus::NoDetections);
    assert!(r.groups.is_empty());
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["status"], "no_detections");
}

#[test]
fn missing_cluster_falls_back_or_errors() {
    let set = Arc::new(FixtureSet::from_dir(demo()).unwrap());
    let mut store = CatalogStore::new();
    let text = std::fs::read_to_string(demo().join("catalog.ndjson")).unwrap();
    let kept: String = text
        .lines()
        .filter(|l| !l.contains(r#""label": "jeans""#))
        .map(|l| format!("{l}\n"))
        .collect();
    store.ingest_str(&kept).unwrap();
    assert!(store.cluster("jeans").is_none());

    let providers = ProviderBundle::from_fixtures(set.clone());
    let img = set.image("img_001").unwrap();
    let tax = Taxonomy::default();
    let on = recommend(&img, &providers, &tax, &store, &PipelineConfig::default()).unwrap();
    let g = on.groups[0].group().unwrap();
    assert_eq!(g.cluster, "jeans");
    assert!(g.fallback);
    assert!(!g.hits.is_empty());
    assert!(g.hits.iter().all(|h| h.product.label != "jeans"));

    let off = PipelineConfig {
        fallback_all_clusters: false,
        ..PipelineConfig::default()
    };
    let r = recommend(&img, &providers, &tax, &store, &off).unwrap();
    match &r.groups[0] {
        GroupOutcome::Error(f) => assert_eq!(f.error.code, "unknown_cluster"),
        other => panic!("expected error group, got {other:?}"),
    }
    assert!(r.groups[1].group().is_some());
}
