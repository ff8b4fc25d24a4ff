//! Exit criterion for the HTTP surface: the full session flow against a
//! fresh store, restart survival, and stable wrong-state codes.

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use reqrec_core::datastore::{load_state, seed_catalog};
use reqrec_core::{Dataset, SessionConfig};
use reqrec_service::api::{app, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(
    router: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = router.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn router_for(store: &Path) -> Router {
    let dataset = if store.exists() {
        load_state(store).unwrap()
    } else {
        Dataset::new(seed_catalog(), SessionConfig::default()).unwrap()
    };
    app(Arc::new(AppState::new(dataset, Some(store.to_path_buf()))))
}

#[tokio::test]
async fn full_api_flow_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("state.json");
    let router = router_for(&store);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_owned());
        }
    };

    let (status, created) = call(
        &router,
        "POST",
        "/sessions",
        Some(json!({ "stakeholder_id": "alice", "education_level": "PhD" })),
    )
    .await;
    check(status == StatusCode::CREATED, "create session returns 201");
    let id = created["id"].as_str().unwrap().to_owned();
    let seeds: Vec<String> = created["presented_seeds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    check(seeds.len() == 3, "three seeds presented");

    let (status, body) = call(
        &router,
        "POST",
        &format!("/sessions/{id}/recommendations"),
        Some(json!({})),
    )
    .await;
    check(
        status == StatusCode::CONFLICT && body["code"] == "wrong_state",
        "recommend before rating is wrong_state",
    );
    let (status, body) = call(
        &router,
        "POST",
        &format!("/sessions/{id}/feedback"),
        Some(json!({ "feedback": [] })),
    )
    .await;
    check(
        status == StatusCode::CONFLICT && body["code"] == "wrong_state",
        "feedback before recommending is wrong_state",
    );

    let ratings: Vec<Value> = seeds
        .iter()
        .zip([4, 1, 5])
        .map(|(r, s)| json!({ "requirement_id": r, "score": s }))
        .collect();
    let (status, rated) = call(
        &router,
        "POST",
        &format!("/sessions/{id}/ratings"),
        Some(json!({ "ratings": ratings })),
    )
    .await;
    check(
        status == StatusCode::OK && rated["state"] == "SeedsRated",
        "ratings accepted",
    );
    let (_, body) = call(
        &router,
        "POST",
        &format!("/sessions/{id}/ratings"),
        Some(json!({ "ratings": ratings })),
    )
    .await;
    check(
        body["code"] == "wrong_state",
        "second rating submission is wrong_state",
    );

    let (status, recommended) = call(
        &router,
        "POST",
        &format!("/sessions/{id}/recommendations"),
        None,
    )
    .await;
    let items = recommended["recommendation"]["items"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    check(
        status == StatusCode::OK && items.len() == 5,
        "five recommendations",
    );

    let feedback: Vec<Value> = items
        .iter()
        .zip([5, 0, 3, 4, 2])
        .map(|(p, s)| json!({ "requirement_id": p["requirement"], "stars": s }))
        .collect();
    let (status, done) = call(
        &router,
        "POST",
        &format!("/sessions/{id}/feedback"),
        Some(json!({ "feedback": feedback })),
    )
    .await;
    check(
        status == StatusCode::OK && done["state"] == "FeedbackCollected",
        "feedback accepted",
    );

    // Restart: a new router built from the persisted store only.
    drop(router);
    let restarted = router_for(&store);
    let (status, reloaded) = call(&restarted, "GET", &format!("/sessions/{id}"), None).await;
    check(
        status == StatusCode::OK && reloaded == done,
        "session identical after restart",
    );
    let (_, report) = call(&restarted, "GET", "/analytics/satisfaction", None).await;
    check(
        report["report"]["overall"]["participant_count"] == 1
            && report["report"]["per_level"]["PhD"]["no_idea_count"] == 1
            && report["report"]["overall"]["mean_stars"] == 3.5,
        "report reflects persisted feedback",
    );
    let (_, body) = call(
        &restarted,
        "POST",
        &format!("/sessions/{id}/feedback"),
        Some(json!({ "feedback": [] })),
    )
    .await;
    check(
        body["code"] == "wrong_state",
        "feedback twice is wrong_state after restart",
    );

    let ok = failures.is_empty();
    println!(
        "[{}] full API flow with restart: {}",
        if ok { "PASS" } else { "FAIL" },
        if ok {
            "create, rate, recommend, feedback, reload".to_owned()
        } else {
            failures.join("; ")
        }
    );
    assert!(ok, "{failures:?}");
}
