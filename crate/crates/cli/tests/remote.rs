mod common;

use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use fashionrec::providers::{Detector, ImageRef, ProviderError, TextEmbedder};
use fashionrec::{recommend, PipelineConfig, ProviderBundle, Taxonomy};
use fashionrec_cli::remote::RemoteProviders;

use common::*;

fn image(id: &str) -> ImageRef {
    let doc = demo_fixtures().image(id).unwrap();
    doc.with_payload(id.as_bytes().to_vec())
}

#[test]
fn in_flight_requests_never_exceed_cap() {
    let sidecar = Sidecar {
        delay: Duration::from_millis(40),
        ..Sidecar::new()
    };
    let peak = sidecar.peak.clone();
    let requests = sidecar.requests.clone();
    let url = spawn_sidecar(sidecar);
    let remote = Arc::new(RemoteProviders::new(&url, Duration::from_secs(10), 8));
    let img = image("img_001");
    std::thread::scope(|s| {
        for _ in 0..24 {
            let remote = remote.clone();
            let img = img.clone();
            s.spawn(move || {
                assert_eq!(remote.detect(&img).unwrap().len(), 2);
            });
        }
    });
    assert_eq!(requests.load(Ordering::SeqCst), 24);
    let peak = peak.load(Ordering::SeqCst);
    assert!(peak <= 8, "peak {peak}");
    assert!(peak > 1, "requests were serialised: peak {peak}");
}

#[test]
fn pipeline_under_parallelism_respects_cap() {
    let sidecar = Sidecar {
        delay: Duration::from_millis(5),
        ..Sidecar::new()
    };
    let peak = sidecar.peak.clone();
    let url = spawn_sidecar(sidecar);
    let remote = Arc::new(RemoteProviders::new(&url, Duration::from_secs(10), 2));
    let bundle = ProviderBundle::new(remote.clone(), remote.clone(), remote.clone(), remote).unwrap();
    let cfg = PipelineConfig {
        parallelism: 8,
        ..PipelineConfig::default()
    };
    let recs = recommend(&image("img_005"), &bundle, &Taxonomy::default(), &demo_store(), &cfg).unwrap();
    assert_eq!(recs.groups.iter().filter(|g| g.group().is_some()).count(), 3);
    assert!(peak.load(Ordering::SeqCst) <= 2);
}

#[test]
fn server_errors_are_unavailable_client_errors_malformed() {
    for (status, unavailable) in [(500, true), (503, true), (400, false), (422, false)] {
        let url = spawn_sidecar(Sidecar {
            fail_with: Some(status),
            ..Sidecar::new()
        });
        let remote = RemoteProviders::new(&url, Duration::from_secs(5), 8);
        let err = remote.detect(&image("img_001")).unwrap_err();
        match (unavailable, &err) {
            (true, ProviderError::RemoteUnavailable(_)) | (false, ProviderError::MalformedResponse(_)) => {}
            _ => panic!("status {status} gave {err:?}"),
        }
    }
}

#[test]
fn refused_connection_is_unavailable() {
    let remote = RemoteProviders::new(&dead_url(), Duration::from_secs(5), 8);
    assert!(matches!(
        remote.embed_texts(&["jeans".into()]),
        Err(ProviderError::RemoteUnavailable(_))
    ));
}

#[test]
fn garbage_body_is_malformed() {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = axum::Router::new()
                .route("/detect", axum::routing::post(|| async { "not json" }))
                .route(
                    "/embed_text",
                    axum::routing::post(|| async { r#"{"dim": 3, "vectors": [[1, 2]]}"# }),
                );
            let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(l.local_addr().unwrap()).unwrap();
            axum::serve(l, app).await.unwrap();
        });
    });
    let url = format!("http://{}", rx.recv().unwrap());
    let remote = RemoteProviders::new(&url, Duration::from_secs(5), 8);
    assert!(matches!(
        remote.detect(&image("img_001")),
        Err(ProviderError::MalformedResponse(_))
    ));
    assert!(matches!(
        remote.embed_texts(&["jeans".into()]),
        Err(ProviderError::MalformedResponse(_))
    ));
}
