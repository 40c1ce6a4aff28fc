//! HTTP lifecycle of the study service.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use careerrec::classifier::LrConfig;
use careerrec::dataset::{generate_synthetic, SyntheticConfig};
use careerrec::interests::{build_questionnaire, fit_lda, QuestionnaireSpec};
use careerrec::ncf::NcfConfig;
use careerrec::pipeline::{build_variant, SystemVariant, VariantKind};
use careerrec::service::{router, ServiceConfig, ServiceState, SessionState, RESPONSES_FILE};
use careerrec::study::{analyze, read_responses};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::sync::OnceLock;
use tower::ServiceExt;

const TOKEN: &str = "let-me-in";

fn fixtures() -> &'static (Vec<SystemVariant>, QuestionnaireSpec) {
    static F: OnceLock<(Vec<SystemVariant>, QuestionnaireSpec)> = OnceLock::new();
    F.get_or_init(|| {
        let d = generate_synthetic(&SyntheticConfig {
            n_users: 120,
            n_items: 50,
            n_concentrations: 5,
            likes_per_user: 8,
            seed: 9,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let ncf = NcfConfig {
            embedding_dim: 8,
            hidden_units: 4,
            epochs: 30,
            learning_rate: 0.01,
            fold_in_iterations: 20,
            ..NcfConfig::default()
        };
        let lr = LrConfig {
            epochs: 50,
            ..LrConfig::default()
        };
        let variants = VariantKind::ALL
            .into_iter()
            .map(|k| build_variant(&d, k, &ncf, &lr).unwrap())
            .collect();
        let topics = fit_lda(&d, 5, 30, 1).unwrap();
        let q = build_questionnaire(&topics, 4, 12, &[]).unwrap();
        (variants, q)
    })
}

fn state(dir: &std::path::Path, seed: u64) -> Arc<ServiceState> {
    let (variants, q) = fixtures().clone();
    Arc::new(
        ServiceState::new(
            variants,
            q,
            ServiceConfig {
                data_dir: dir.to_path_buf(),
                admin_token: Some(TOKEN.into()),
                assignment_seed: seed,
            },
        )
        .unwrap(),
    )
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>, token: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = req
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body.map(|v| v.to_string()), None).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn demographics(gender: &str) -> Value {
    json!({"gender": gender, "class_standing": "sophomore", "openness": "open"})
}

fn selections(n: usize) -> Value {
    let items: Vec<String> = fixtures().1.item_ids().iter().take(n).map(|s| s.to_string()).collect();
    json!({ "selections": items })
}

fn payload(recs: &Value, answer: &str) -> Value {
    let judgments: Vec<Value> = recs
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            json!({
                "concentration_id": r["concentration_id"],
                "acceptance_answer": answer,
                "perceived_dominance": "female_dominated"
            })
        })
        .collect();
    json!({
        "q_stereotype": 2, "q_disparity_personal": 4,
        "judgments": judgments, "q_use_again": 4, "q_recommend_to_others": 3
    })
}

/// Drive one participant through the whole study; returns the session id.
async fn complete_session(app: &Router, gender: &str, answer: &str) -> String {
    let (s, created) = call_json(app, "POST", "/api/sessions", Some(demographics(gender))).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap().to_string();
    let (s, _) = call_json(app, "POST", &format!("/api/sessions/{id}/interests"), Some(selections(5))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, recs) = call_json(app, "GET", &format!("/api/sessions/{id}/recommendations"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call_json(app, "POST", &format!("/api/sessions/{id}/responses"), Some(payload(&recs, answer))).await;
    assert_eq!(s, StatusCode::OK);
    id
}

#[tokio::test]
async fn full_lifecycle_and_state_violations() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 1);
    let app = router(st.clone());

    let (s, q) = call_json(&app, "GET", "/api/questionnaire", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(q["version"], 1);
    assert_eq!(q["items"].as_array().unwrap().len(), 12);

    let (s, created) = call_json(&app, "POST", "/api/sessions", Some(demographics("female"))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(created["state"], "created");
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(id.len(), 32);
    assert!(matches!(
        created["variant_kind"].as_str().unwrap(),
        "gender_aware_female" | "gender_debiased"
    ));

    let recs_uri = format!("/api/sessions/{id}/recommendations");
    let interests_uri = format!("/api/sessions/{id}/interests");
    let responses_uri = format!("/api/sessions/{id}/responses");

    assert_eq!(call_json(&app, "GET", &recs_uri, None).await.0, StatusCode::CONFLICT);
    assert_eq!(
        call_json(&app, "POST", &interests_uri, Some(json!({"selections": []}))).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let (s, body) = call_json(&app, "POST", &interests_uri, Some(json!({"selections": ["not-an-item"]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("not-an-item"));
    assert_eq!(
        call(&app, "POST", &interests_uri, Some("{not json".into()), None).await.0,
        StatusCode::BAD_REQUEST
    );

    let (s, ack) = call_json(&app, "POST", &interests_uri, Some(selections(10))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["state"], "interests_submitted");
    assert_eq!(
        call_json(&app, "POST", &interests_uri, Some(selections(3))).await.0,
        StatusCode::CONFLICT
    );
    assert_eq!(
        call_json(&app, "POST", &responses_uri, Some(json!({}))).await.0,
        StatusCode::CONFLICT
    );

    let (s, recs) = call_json(&app, "GET", &recs_uri, None).await;
    assert_eq!(s, StatusCode::OK);
    let list = recs.as_array().unwrap();
    assert_eq!(list.len(), 3);
    for (i, r) in list.iter().enumerate() {
        assert_eq!(r["rank"], i + 1);
        assert!(!r["display_name"].as_str().unwrap().is_empty());
    }
    assert_eq!(call_json(&app, "GET", &recs_uri, None).await.1, recs);

    let mut wrong = payload(&recs, "yes");
    wrong["judgments"][1]["concentration_id"] = json!("c_unserved");
    assert_eq!(
        call_json(&app, "POST", &responses_uri, Some(wrong)).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let mut bad_likert = payload(&recs, "yes");
    bad_likert["q_use_again"] = json!(9);
    assert_eq!(
        call_json(&app, "POST", &responses_uri, Some(bad_likert)).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );

    let (s, ack) = call_json(&app, "POST", &responses_uri, Some(payload(&recs, "yes"))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["state"], "completed");
    assert_eq!(
        call_json(&app, "POST", &responses_uri, Some(payload(&recs, "yes"))).await.0,
        StatusCode::CONFLICT
    );
    assert_eq!(call_json(&app, "GET", &recs_uri, None).await.1, recs);
    assert_eq!(st.session(&id).await.unwrap().state, SessionState::Completed);

    assert_eq!(
        call_json(&app, "GET", "/api/sessions/nope/recommendations", None).await.0,
        StatusCode::NOT_FOUND
    );
    let (s, body) = call_json(&app, "POST", "/api/sessions", Some(json!({"gender": "robot", "openness": "open"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["fields"], json!(["gender", "class_standing"]));

    assert_eq!(call(&app, "GET", "/api/export", None, None).await.0, StatusCode::FORBIDDEN);
    assert_eq!(call(&app, "GET", "/api/export", None, Some("wrong")).await.0, StatusCode::FORBIDDEN);
    let (s, bytes) = call(&app, "GET", "/api/export", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    let exported = read_responses(&bytes[..]).unwrap();
    assert_eq!(exported.len(), 1);
    assert_eq!(exported[0].session_id, id);
}

#[tokio::test]
async fn export_is_empty_without_responses_and_disabled_without_token() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), 1));
    let (s, bytes) = call(&app, "GET", "/api/export", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    assert!(bytes.is_empty());

    let (variants, q) = fixtures().clone();
    let closed = ServiceState::new(
        variants,
        q,
        ServiceConfig {
            data_dir: dir.path().join("other"),
            admin_token: None,
            assignment_seed: 0,
        },
    )
    .unwrap();
    let app = router(Arc::new(closed));
    assert_eq!(call(&app, "GET", "/api/export", None, Some(TOKEN)).await.0, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn assignment_rule() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), 42));
    let mut debiased = 0;
    for _ in 0..1000 {
        let (_, s) = call_json(&app, "POST", "/api/sessions", Some(demographics("female"))).await;
        match s["variant_kind"].as_str().unwrap() {
            "gender_debiased" => debiased += 1,
            "gender_aware_female" => {}
            other => panic!("female routed to {other}"),
        }
    }
    assert!((450..=550).contains(&debiased), "{debiased} of 1000");
    for g in ["nonbinary", "undisclosed"] {
        for _ in 0..50 {
            let (_, s) = call_json(&app, "POST", "/api/sessions", Some(demographics(g))).await;
            assert_eq!(s["variant_kind"], "gender_debiased");
        }
    }
    for _ in 0..50 {
        let (_, s) = call_json(&app, "POST", "/api/sessions", Some(demographics("male"))).await;
        assert!(matches!(s["variant_kind"].as_str().unwrap(), "gender_debiased" | "gender_aware_male"));
    }
}

#[tokio::test]
async fn export_then_analyze_matches_in_memory_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 7);
    let app = router(st.clone());
    let genders = ["female", "male", "nonbinary", "female", "male", "undisclosed"];
    let answers = ["yes", "no", "dont_know"];
    for i in 0..18 {
        complete_session(&app, genders[i % genders.len()], answers[i % answers.len()]).await;
    }
    let (s, bytes) = call(&app, "GET", "/api/export", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    let exported = read_responses(&bytes[..]).unwrap();
    let in_memory = st.responses().await;
    assert_eq!(exported, in_memory);
    assert_eq!(analyze(&exported).unwrap(), analyze(&in_memory).unwrap());
}

#[tokio::test]
async fn sessions_and_responses_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (done, pending) = {
        let app = router(state(dir.path(), 3));
        let done = complete_session(&app, "male", "yes").await;
        let (_, created) = call_json(&app, "POST", "/api/sessions", Some(demographics("female"))).await;
        let pending = created["session_id"].as_str().unwrap().to_string();
        call_json(&app, "POST", &format!("/api/sessions/{pending}/interests"), Some(selections(4))).await;
        (done, pending)
    };
    let log_before = std::fs::read(dir.path().join(RESPONSES_FILE)).unwrap();

    let st = state(dir.path(), 3);
    assert_eq!(st.session(&done).await.unwrap().state, SessionState::Completed);
    assert_eq!(st.session(&pending).await.unwrap().state, SessionState::InterestsSubmitted);
    assert_eq!(st.responses().await.len(), 1);
    let app = router(st.clone());
    let (s, recs) = call_json(&app, "GET", &format!("/api/sessions/{pending}/recommendations"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call_json(&app, "POST", &format!("/api/sessions/{pending}/responses"), Some(payload(&recs, "no"))).await;
    assert_eq!(s, StatusCode::OK);
    let log_after = std::fs::read(dir.path().join(RESPONSES_FILE)).unwrap();
    assert!(log_after.starts_with(&log_before));
    assert_eq!(read_responses(&log_after[..]).unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_write_whole_records() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 5);
    let app = router(st.clone());
    let tasks: Vec<_> = (0..24)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                let g = if i % 2 == 0 { "female" } else { "male" };
                complete_session(&app, g, "yes").await
            })
        })
        .collect();
    let mut ids = Vec::new();
    for t in tasks {
        ids.push(t.await.unwrap());
    }
    let log = std::fs::read(dir.path().join(RESPONSES_FILE)).unwrap();
    let parsed = read_responses(&log[..]).unwrap();
    assert_eq!(parsed.len(), 24);
    let mut got: Vec<String> = parsed.into_iter().map(|r| r.session_id).collect();
    got.sort();
    ids.sort();
    assert_eq!(got, ids);
}

#[tokio::test]
async fn identical_selections_give_identical_recommendations() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), 0));
    let mut seen = std::collections::BTreeMap::new();
    for _ in 0..6 {
        let (_, created) = call_json(&app, "POST", "/api/sessions", Some(demographics("nonbinary"))).await;
        let id = created["session_id"].as_str().unwrap().to_string();
        call_json(&app, "POST", &format!("/api/sessions/{id}/interests"), Some(selections(6))).await;
        let (_, recs) = call_json(&app, "GET", &format!("/api/sessions/{id}/recommendations"), None).await;
        seen.insert(recs.to_string(), ());
    }
    assert_eq!(seen.len(), 1);
}
