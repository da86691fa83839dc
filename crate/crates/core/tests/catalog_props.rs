use std::collections::BTreeMap;

use fashionrec::catalog::{CatalogError, CatalogStore, ProductRecord};
use fashionrec::search::{normalize_label, search, ScoringParams};
use proptest::prelude::*;

fn record(id: u8, label: &str, words: &str) -> ProductRecord {
    ProductRecord {
        id: format!("p{id}"),
        label: label.to_owned(),
        title: words.to_owned(),
        description: String::new(),
        image_uri: format!("img/p{id}.jpg"),
        retailer: None,
        price: Some(f64::from(id) * 1.25),
    }
}

const LABELS: [&str; 4] = ["jeans", "Denim Jacket", "denim  jacket", "chinos"];

fn ops() -> impl Strategy<Value = Vec<(u8, usize, String)>> {
    prop::collection::vec((0u8..12, 0usize..LABELS.len(), "[a-e]( [a-e]){0,4}"), 1..40)
}

fn check_model(store: &CatalogStore, model: &BTreeMap<String, ProductRecord>) -> Result<(), TestCaseError> {
    prop_assert_eq!(store.len(), model.len());
    let mut by_cluster: BTreeMap<String, usize> = BTreeMap::new();
    for r in model.values() {
        prop_assert_eq!(store.get(&r.id).unwrap(), r);
        let cluster = normalize_label(&r.label);
        prop_assert!(store.cluster(&cluster).unwrap().contains(&r.id));
        *by_cluster.entry(cluster).or_default() += 1;
    }
    let listed: BTreeMap<String, usize> = store
        .list_clusters()
        .into_iter()
        .map(|c| (c.name, c.doc_count))
        .collect();
    prop_assert_eq!(listed, by_cluster);
    prop_assert_eq!(store.clusters().count(), store.list_clusters().len());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn upserts_are_last_write_wins(ops in ops()) {
        let mut store = CatalogStore::new();
        let mut model = BTreeMap::new();
        for (id, label, words) in ops {
            let r = record(id, LABELS[label], &words);
            store.upsert(r.clone()).unwrap();
            model.insert(r.id.clone(), r);
        }
        check_model(&store, &model)?;
    }

    #[test]
    fn save_load_and_log_replay_agree(ops in ops(), q in "[a-e]( [a-e]){0,2}") {
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("catalog.log");
        let mut store = CatalogStore::new();
        let mut log = Vec::new();
        let mut model = BTreeMap::new();
        for (id, label, words) in ops {
            let r = record(id, LABELS[label], &words);
            store.ingest_logged(serde_json::to_string(&r).unwrap().as_bytes(), &mut log).unwrap();
            model.insert(r.id.clone(), r);
        }
        std::fs::write(&log_path, &log).unwrap();
        let params = ScoringParams { k1: 0.9, b: 0.4, proximity_weight: 0.3 };
        store.save(dir.path().join("store"), &params).unwrap();
        let (loaded, got_params) = CatalogStore::load(dir.path().join("store")).unwrap();
        let (replayed, _) = CatalogStore::rebuild_from_log(&log_path).unwrap();
        prop_assert_eq!(got_params, params);
        check_model(&loaded, &model)?;
        check_model(&replayed, &model)?;
        for idx in store.clusters() {
            let a = search(idx, &params, &q, 50).unwrap();
            prop_assert_eq!(&a, &search(loaded.cluster(idx.name()).unwrap(), &params, &q, 50).unwrap());
            let b = search(replayed.cluster(idx.name()).unwrap(), &params, &q, 50).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(&x.doc_id, &y.doc_id);
                prop_assert!((x.score - y.score).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn partial_ingest_reports_bad_lines() {
    let mut store = CatalogStore::new();
    let text = concat!(
        r#"{"id":"p1","label":"jeans","title":"blue jeans","image_uri":"a.jpg"}"#,
        "\n",
        r#"{"id":"p2","title":"no label","image_uri":"b.jpg"}"#,
        "\n",
        r#"{"id":"p3","label":"chinos","title":"sand chinos","image_uri":"c.jpg"}"#,
        "\n"
    );
    let report = store.ingest_str(text).unwrap();
    assert_eq!(report.accepted, 2);
    assert_eq!(report.rejected.len(), 1);
    assert_eq!(report.rejected[0].line, 2);
    assert_eq!(report.rejected[0].code, "missing_field");
}

#[test]
fn direct_upsert_validates() {
    let mut store = CatalogStore::new();
    assert!(matches!(
        store.upsert(record(1, "!!", "x")),
        Err(CatalogError::InvalidRecord(_))
    ));
    let mut r = record(1, "jeans", "x");
    r.id = " ".into();
    assert!(matches!(store.upsert(r), Err(CatalogError::InvalidRecord(_))));
}

#[test]
fn corrupt_snapshot_is_detected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = CatalogStore::new();
    store.upsert(record(1, "jeans", "blue")).unwrap();
    store.save(dir.path(), &ScoringParams::default()).unwrap();
    let snap = dir.path().join("clusters/jeans.snap");
    let mut bytes = std::fs::read(&snap).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 0x20;
    std::fs::write(&snap, bytes).unwrap();
    assert!(CatalogStore::load(dir.path()).is_err());
}
