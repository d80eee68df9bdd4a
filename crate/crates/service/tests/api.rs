use std::path::PathBuf;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use palimpsest_core::pipeline::{self, PipelineConfig};
use palimpsest_core::synthetic::{SyntheticPage, SyntheticSpec};
use palimpsest_core::Method;
use palimpsest_service::{router, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _tmp: tempfile::TempDir,
    manifest: PathBuf,
    out: PathBuf,
    annotations: String,
    app: Router,
}

fn fixture(ui_dir: Option<PathBuf>) -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let page = SyntheticPage::generate(&SyntheticSpec::new(100, 80, 6, 3)).unwrap();
    let manifest = page.write(&tmp.path().join("page")).unwrap();
    let annotations = page.training_set(50, 4).to_text();
    let out = tmp.path().join("out");
    let app = router(ServiceConfig {
        out_dir: out.clone(),
        ui_dir,
    });
    Fixture {
        _tmp: tmp,
        manifest,
        out,
        annotations,
        app,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body.to_string()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, "GET", uri, Body::empty()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn load_stack(f: &Fixture) {
    let (s, v) = call_json(
        &f.app,
        "POST",
        "/api/session/stack",
        json!({ "manifest": f.manifest }),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
}

async fn put_annotations(f: &Fixture, text: &str) -> (StatusCode, Value) {
    let (s, b) = call(&f.app, "PUT", "/api/annotations", text.to_string()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn wait_for(app: &Router, run_id: &str) -> Value {
    for _ in 0..600 {
        let (s, v) = get_json(app, &format!("/api/runs/{run_id}")).await;
        assert_eq!(s, StatusCode::OK);
        if v["status"] == "DONE" || v["status"] == "FAILED" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run {run_id} did not finish");
}

fn png_size(png: &[u8]) -> (u32, u32) {
    assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    let w = u32::from_be_bytes(png[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(png[20..24].try_into().unwrap());
    (w, h)
}

#[tokio::test]
async fn band_images_and_geometry() {
    let f = fixture(None);
    let (s, _) = call(&f.app, "GET", "/api/band/0?scale=1", Body::empty()).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "no stack yet");

    load_stack(&f).await;
    let (s, v) = get_json(&f.app, "/api/bands").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["bands"].as_array().unwrap().len(), 6);
    let id = v["bands"][0]["band_id"].as_u64().unwrap();

    let (s, png) = call(&f.app, "GET", &format!("/api/band/{id}?scale=1"), Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(png_size(&png), (100, 80));
    for (scale, dims) in [("1/4", (25, 20)), ("0.25", (25, 20)), ("1/8", (13, 10))] {
        let (s, png) = call(
            &f.app,
            "GET",
            &format!("/api/band/{id}?scale={scale}"),
            Body::empty(),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(png_size(&png), dims, "scale {scale}");
    }
    let (s, _) = call(&f.app, "GET", "/api/band/999?scale=1", Body::empty()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&f.app, "GET", "/api/band/abc", Body::empty()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&f.app, "GET", &format!("/api/band/{id}?scale=0.3"), Body::empty()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn annotations_upload_and_round_trip() {
    let f = fixture(None);
    load_stack(&f).await;
    let (s, v) = put_annotations(&f, &f.annotations).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(
        v["counts"],
        json!({"overwriting": 50, "underwriting": 50, "parchment": 50, "both": 50})
    );
    let version = v["version"].as_u64().unwrap();

    let (s, text) = call(&f.app, "GET", "/api/annotations", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(String::from_utf8(text).unwrap(), f.annotations);

    let (s, v) = put_annotations(&f, "").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].is_string());

    let (s, v) = put_annotations(&f, "class,x,y\nparchment,1,2\nparchment,oops,3\n").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["line"], 3);

    let (s, v) = put_annotations(&f, "class,x,y\nparchment,1,2\nparchment,1,2\n").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["counts"]["parchment"], 1);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
    // last write wins, and the version moves on
    assert!(v["version"].as_u64().unwrap() > version);
}

#[tokio::test]
async fn run_admission() {
    let f = fixture(None);
    let (s, _) = call_json(&f.app, "POST", "/api/runs", json!({"method": "pca_unsupervised"})).await;
    assert_eq!(s, StatusCode::CONFLICT, "no stack");
    load_stack(&f).await;

    let (s, v) = call_json(&f.app, "POST", "/api/runs", json!({"method": "cva"})).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    let (s, v) = call_json(&f.app, "POST", "/api/runs", json!({"method": "pca_unsupervised"})).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let run_id = v["run_id"].as_str().unwrap().to_string();

    let (s, _) = call_json(&f.app, "POST", "/api/runs", json!({"method": "nope"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&f.app, "POST", "/api/runs", json!({"method": "pca_unsupervised", "k": 0})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let done = wait_for(&f.app, &run_id).await;
    assert_eq!(done["status"], "DONE", "{done}");
    assert!(done["report"].is_null(), "no evaluation points");
    let (s, _) = get_json(&f.app, "/api/runs/run-9999").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn completed_run_matches_the_file_pipeline() {
    let f = fixture(None);
    load_stack(&f).await;
    put_annotations(&f, &f.annotations).await;
    let request = json!({
        "method": "cva",
        "k": 3,
        "modes": ["full", "train", "p1"],
        "depths": [8, 16],
        "composite": {"red": 1, "green": 0, "blue": 2, "swap": null},
    });
    let (s, v) = call_json(&f.app, "POST", "/api/runs", request).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let run_id = v["run_id"].as_str().unwrap().to_string();
    let done = wait_for(&f.app, &run_id).await;
    assert_eq!(done["status"], "DONE", "{done}");
    assert!(done["report"]["db"].as_f64().unwrap() > 0.0);
    assert!(done["report"]["dunn"].is_number());
    let preview_url = done["links"]["preview"].as_str().unwrap();
    let (s, png) = call(&f.app, "GET", preview_url, Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(png_size(&png), (100, 80));
    assert_eq!(png[24], 8, "previews are 8-bit");

    // the same run through the file pipeline
    let ann = f.out.parent().unwrap().join("points.csv");
    std::fs::write(&ann, &f.annotations).unwrap();
    let cli_dir = f.out.parent().unwrap().join("cli");
    let mut cfg = PipelineConfig::new(&f.manifest);
    cfg.input.annotations = Some(ann);
    cfg.fit.method = Method::Cva;
    cfg.fit.components = Some(3);
    cfg.render.modes = vec!["full".parse().unwrap(), "train".parse().unwrap(), "p1".parse().unwrap()];
    cfg.render.depths = vec![palimpsest_core::BitDepth::Eight, palimpsest_core::BitDepth::Sixteen];
    cfg.composites = vec![palimpsest_core::CompositeRecipe::new(1, 0, 2)];
    cfg.output.dir = cli_dir.clone();
    cfg.output.run = run_id.clone();
    let out = pipeline::execute(&pipeline::prepare(&cfg).unwrap(), &cfg).unwrap();

    let served: Vec<String> = done["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_string())
        .collect();
    assert_eq!(served, out.artifacts);
    for name in &served {
        if name == pipeline::RUN_META {
            continue; // echoes the output directory
        }
        let (s, bytes) = call(
            &f.app,
            "GET",
            &format!("/api/runs/{run_id}/artifact/{name}"),
            Body::empty(),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{name}");
        assert_eq!(bytes, std::fs::read(cli_dir.join(name)).unwrap(), "{name}");
    }
    let (s, _) = call(
        &f.app,
        "GET",
        &format!("/api/runs/{run_id}/artifact/..%2Fsecret"),
        Body::empty(),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn queue_is_fifo_and_failures_are_reported() {
    let f = fixture(None);
    load_stack(&f).await;
    put_annotations(&f, &f.annotations).await;
    let mut ids = Vec::new();
    for method in ["cva", "pca", "lda_bad", "pca_unsupervised"] {
        let body = if method == "lda_bad" {
            json!({"method": "lda"}) // four classes: LDA refuses
        } else {
            json!({"method": method})
        };
        let (s, v) = call_json(&f.app, "POST", "/api/runs", body).await;
        assert_eq!(s, StatusCode::ACCEPTED);
        ids.push(v["run_id"].as_str().unwrap().to_string());
    }
    let (_, v) = get_json(&f.app, "/api/runs/run-0004").await;
    assert!(
        v["status"] == "QUEUED" || v["status"] == "RUNNING" || v["status"] == "DONE",
        "{v}"
    );
    if v["status"] == "QUEUED" {
        assert!(v["artifacts"].as_array().unwrap().is_empty());
    }
    let mut finished = Vec::new();
    for id in &ids {
        finished.push(wait_for(&f.app, id).await);
    }
    assert_eq!(ids, ["run-0001", "run-0002", "run-0003", "run-0004"]);
    assert_eq!(finished[2]["status"], "FAILED");
    assert!(finished[2]["error"].as_str().unwrap().contains("2 classes"));
    for i in [0, 1, 3] {
        assert_eq!(finished[i]["status"], "DONE");
    }
    let (_, session) = get_json(&f.app, "/api/session").await;
    assert_eq!(session["runs"], json!(ids));
}

#[tokio::test]
async fn degenerate_annotations_fail_with_a_numeric_error() {
    let f = fixture(None);
    load_stack(&f).await;
    // one point per class: no within-class scatter at all
    put_annotations(&f, "class,x,y\nparchment,3,3\nunderwriting,50,40\n").await;
    let (_, v) = call_json(&f.app, "POST", "/api/runs", json!({"method": "cva"})).await;
    let done = wait_for(&f.app, v["run_id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "FAILED");
    assert!(done["artifacts"].as_array().unwrap().is_empty());
    println!("{}", done["error"]);
    assert!(done["error"].as_str().unwrap().contains("positive definite"));
}

#[tokio::test]
async fn stack_errors_and_static_hosting() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<p>ui</p>").unwrap();
    std::fs::write(ui.path().join("app.js"), "1").unwrap();
    let f = fixture(Some(ui.path().to_path_buf()));

    let (s, v) = call_json(
        &f.app,
        "POST",
        "/api/session/stack",
        json!({"manifest": "/nonexistent/manifest.csv"}),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (s, _) = call(&f.app, "POST", "/api/session/stack", "{not json").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call_json(
        &f.app,
        "POST",
        "/api/session/stack",
        json!({"manifest": f.manifest, "crop": "10,10,500,500"}),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    let (s, body) = call(&f.app, "GET", "/", Body::empty()).await;
    assert_eq!((s, body.as_slice()), (StatusCode::OK, b"<p>ui</p>".as_slice()));
    let (s, _) = call(&f.app, "GET", "/app.js", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&f.app, "GET", "/../Cargo.toml", Body::empty()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let plain = fixture(None);
    let (s, body) = call(&plain.app, "GET", "/", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("/api/"));
    let (_, v) = get_json(&plain.app, "/api/session").await;
    assert!(v["session_id"].is_string());
    assert!(v["stack"].is_null());
}
