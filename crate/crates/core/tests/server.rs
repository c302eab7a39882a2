mod common;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value as Json};
use tower::ServiceExt;

use common::{synthetic_csv, theta_star, SYNTHETIC_NET};
use hybridnet::inference::{exact_posterior, lw_posterior, Evidence};
use hybridnet::server::{query_seed, router, AppState, Model, ServerConfig};

const N: usize = 100_000;

fn app() -> (Router, AppState) {
    let st = AppState::new(ServerConfig { n_samples: N, seed: 7 });
    st.insert_model("default", Model::from_text(SYNTHETIC_NET, None, Some(theta_star())).unwrap());
    (router(st.clone()), st)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Json>) -> (StatusCode, Json) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = if bytes.is_empty() {
        Json::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Json::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, json)
}

async fn new_session(app: &Router) -> String {
    let (s, body) = call(app, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(s, StatusCode::CREATED);
    body["id"].as_str().unwrap().to_string()
}

fn probs(body: &Json, var: &str) -> Vec<f64> {
    body["marginals"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["variable"] == var)
        .unwrap()["probs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[tokio::test]
async fn posteriors_pass_through_to_the_engine() {
    let (app, st) = app();
    let _ = st;
    let sid = new_session(&app).await;
    let (s, _) = call(&app, Method::PUT, &format!("/sessions/{sid}/findings/D"), Some(json!(2))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&app, Method::PUT, &format!("/sessions/{sid}/findings/E"), Some(json!({"value": 2.5}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, body) = call(&app, Method::GET, &format!("/sessions/{sid}/posteriors?vars=A,C"), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["marginals"].as_array().unwrap().len(), 2);

    let model = Model::from_text(SYNTHETIC_NET, None, Some(theta_star())).unwrap();
    let net = &model.net;
    let mut ev = Evidence::new();
    ev.set(3, 2);
    ev.set(4, Evidence::finding_state(net, 4, &json!(2.5)).unwrap());
    let queries = [0usize, 1, 2];
    let direct = lw_posterior(net, &ev, &queries, N, query_seed(7, &ev)).unwrap();
    assert_eq!(probs(&body, "A"), direct.marginal("A").unwrap());
    assert_eq!(probs(&body, "C"), direct.marginal("C").unwrap());

    let exact = exact_posterior(net, &ev, &[0, 2]).unwrap();
    for v in ["A", "C"] {
        for (a, b) in probs(&body, v).iter().zip(exact.marginal(v).unwrap()) {
            assert!((a - b).abs() < 0.01, "{v}: {a} vs {b}");
        }
    }
    let ranking = body["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 3);
    let p: Vec<f64> = ranking.iter().map(|r| r["probability"].as_f64().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[0] >= w[1]));
}

#[tokio::test]
async fn findings_put_then_delete_restores_the_posterior() {
    let (app, _) = app();
    let sid = new_session(&app).await;
    let url = format!("/sessions/{sid}/posteriors");
    let (_, before) = call(&app, Method::GET, &url, None).await;
    let (_, again) = call(&app, Method::GET, &url, None).await;
    assert_eq!(before, again, "queries are idempotent");

    let (_, view) = call(&app, Method::PUT, &format!("/sessions/{sid}/findings/B"), Some(json!("2"))).await;
    assert_eq!(view["findings"]["B"], 2);
    let (_, during) = call(&app, Method::GET, &url, None).await;
    assert_ne!(before, during);
    let (s, view) = call(&app, Method::DELETE, &format!("/sessions/{sid}/findings/B"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(view["findings"].as_object().unwrap().is_empty());
    let (_, after) = call(&app, Method::GET, &url, None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn whatif_outcomes_mix_back_to_the_current_posterior() {
    let (app, _) = app();
    let sid = new_session(&app).await;
    call(&app, Method::PUT, &format!("/sessions/{sid}/findings/D"), Some(json!(1))).await;
    for var in ["E", "B"] {
        let (s, body) = call(&app, Method::GET, &format!("/sessions/{sid}/whatif/{var}"), None).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        let p: f64 = body["outcomes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["probability"].as_f64().unwrap())
            .sum();
        assert!((p - 1.0).abs() < 1e-9);
        let dev = body["mixture_max_deviation"].as_f64().unwrap();
        assert!(dev <= 0.02, "{var}: mixture deviation {dev}");
    }
    let (s, body) = call(&app, Method::GET, &format!("/sessions/{sid}/whatif/D"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "already_observed");
}

#[tokio::test]
async fn sessions_are_isolated() {
    let (app, _) = app();
    let a = new_session(&app).await;
    let b = new_session(&app).await;
    assert_ne!(a, b);
    let (_, base) = call(&app, Method::GET, &format!("/sessions/{b}/posteriors"), None).await;
    call(&app, Method::PUT, &format!("/sessions/{a}/findings/A"), Some(json!(1))).await;
    let (_, view) = call(&app, Method::GET, &format!("/sessions/{b}"), None).await;
    assert!(view["findings"].as_object().unwrap().is_empty());
    let (_, still) = call(&app, Method::GET, &format!("/sessions/{b}/posteriors"), None).await;
    assert_eq!(base, still);
}

#[tokio::test]
async fn error_codes() {
    let (app, _) = app();
    let sid = new_session(&app).await;
    let (s, body) = call(&app, Method::GET, "/sessions/nope/posteriors", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (s, _) = call(&app, Method::GET, "/jobs/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, Method::POST, "/sessions", Some(json!({"model": "missing"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, body) = call(&app, Method::PUT, &format!("/sessions/{sid}/findings/Zed"), Some(json!(1))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "unknown_variable");
    assert_eq!(body["variable"], "Zed");
    let (s, body) = call(&app, Method::PUT, &format!("/sessions/{sid}/findings/A"), Some(json!(5))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid_finding");
    let (s, _) = call(&app, Method::PUT, &format!("/sessions/{sid}/findings/E"), Some(json!("fast"))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::GET, &format!("/sessions/{sid}/posteriors?vars=A,Zed"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::POST, "/models", Some(json!({"model": "var \"X\" : VD : nonsense"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn impossible_evidence_is_422() {
    let st = AppState::new(ServerConfig { n_samples: 1000, seed: 1 });
    let net = json!({"variables": [
        {"name": "X", "cnode": "VD", "n_states": 2, "parents": [], "cpt": [1.0, 0.0]},
        {"name": "Y", "cnode": "VMM", "n_states": 2, "parents": [0], "cpt": [1.0, 0.0, 0.5, 0.5]}
    ]});
    let app = router(st);
    let (s, body) = call(&app, Method::POST, "/models", Some(json!({"id": "tiny", "net": net}))).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    assert_eq!(body["diseases"], json!(["X"]));
    let (_, sess) = call(&app, Method::POST, "/sessions", Some(json!({"model": "tiny"}))).await;
    let sid = sess["id"].as_str().unwrap();
    call(&app, Method::PUT, &format!("/sessions/{sid}/findings/Y"), Some(json!(1))).await;
    let (s, body) = call(&app, Method::GET, &format!("/sessions/{sid}/posteriors"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "impossible_evidence");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn fit_job_runs_and_rejects_a_concurrent_fit() {
    let (app, _) = app();
    let (s, body) = call(&app, Method::POST, "/datasets", Some(json!({"model": "default", "csv": synthetic_csv(200)}))).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    assert_eq!(body["records"], 200);
    let ds = body["id"].as_str().unwrap().to_string();

    let (s, _) = call(&app, Method::POST, "/fit", Some(json!({"dataset": ds, "iterations": 10, "burn_in": 20, "thin": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let fit = json!({"dataset": ds, "iterations": 6000, "burn_in": 2000, "thin": 2, "seed": 5});
    let (s, body) = call(&app, Method::POST, "/fit", Some(fit.clone())).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{body}");
    let job = body["job"].as_str().unwrap().to_string();
    let (s, body) = call(&app, Method::POST, "/fit", Some(fit)).await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");

    let mut last = Json::Null;
    for _ in 0..600 {
        let (s, body) = call(&app, Method::GET, &format!("/jobs/{job}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if body["state"] != "running" {
            last = body;
            break;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    assert_eq!(last["state"], "done", "{last}");
    assert_eq!(last["iteration"], 6000);
    assert!(!last["summary"].as_array().unwrap().is_empty());
    let fitted = last["model"].as_str().unwrap();
    let (s, _) = call(&app, Method::POST, "/sessions", Some(json!({"model": fitted}))).await;
    assert_eq!(s, StatusCode::CREATED);
}
