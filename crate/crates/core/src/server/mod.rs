//! HTTP/JSON service: models, evidence sessions, posterior and what-if
//! queries, dataset upload and asynchronous fitting jobs.

mod model;

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};

use crate::inference::{lw_posterior, Evidence, InferenceError, Marginal, QueryStatus, RankedDisease};
use crate::mcmc::{posterior_summary, read_csv, run_chain, Dataset, LoadOptions, McmcConfig, ParamSummary, UnitAcceptance};
use crate::priors::parse_priors;
use crate::rng::fnv1a;

pub use model::{Model, ModelError};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Likelihood-weighting samples per query unless a session overrides it.
    pub n_samples: usize,
    /// Base seed for sessions created without one.
    pub seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            n_samples: 50_000,
            seed: 1,
        }
    }
}

/// Error responses; every body is `{"error": code, "message": ...}`.
#[derive(Debug)]
pub enum ApiError {
    BadRequest {
        code: &'static str,
        message: String,
        variable: Option<String>,
    },
    NotFound {
        what: &'static str,
        id: String,
    },
    Conflict(String),
    Impossible(QueryStatus),
    Internal(String),
}

impl ApiError {
    fn bad(code: &'static str, message: impl Into<String>) -> Self {
        Self::BadRequest {
            code,
            message: message.into(),
            variable: None,
        }
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        match &e {
            InferenceError::BadFinding { var, .. } => Self::BadRequest {
                code: "invalid_finding",
                message: e.to_string(),
                variable: Some(var.clone()),
            },
            InferenceError::UnknownVariable(v) => Self::BadRequest {
                code: "unknown_variable",
                message: e.to_string(),
                variable: Some(v.clone()),
            },
            _ => Self::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest { code, message, variable } => (
                StatusCode::BAD_REQUEST,
                json!({"error": code, "message": message, "variable": variable}),
            ),
            ApiError::NotFound { what, id } => (
                StatusCode::NOT_FOUND,
                json!({"error": "not_found", "message": format!("unknown {what} `{id}`"), "kind": what, "id": id}),
            ),
            ApiError::Conflict(message) => (StatusCode::CONFLICT, json!({"error": "conflict", "message": message})),
            ApiError::Impossible(status) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({
                    "error": "impossible_evidence",
                    "status": status,
                    "message": "the entered findings have zero probability under the model (or are too rare for the sample size)",
                }),
            ),
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"error": "internal", "message": message}),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Sampling seed for a session query: FNV-1a over the base seed and the
/// findings in variable order, so the same findings give the same answer.
pub fn query_seed(base: u64, evidence: &Evidence) -> u64 {
    let mut bytes = base.to_le_bytes().to_vec();
    for (v, s) in evidence.iter() {
        bytes.extend_from_slice(&(v as u64).to_le_bytes());
        bytes.extend_from_slice(&(s as u64).to_le_bytes());
    }
    fnv1a(&bytes)
}

struct Session {
    model_id: String,
    model: Arc<Model>,
    evidence: Evidence,
    n_samples: usize,
    seed: u64,
    created: u64,
}

impl Session {
    fn query_seed(&self, evidence: &Evidence) -> u64 {
        query_seed(self.seed, evidence)
    }

    fn view(&self, id: &str) -> JsonValue {
        let net = &self.model.net;
        let findings: serde_json::Map<String, JsonValue> = self
            .evidence
            .iter()
            .map(|(v, s)| (net.var(v).name.clone(), json!(s)))
            .collect();
        json!({
            "id": id,
            "model": self.model_id,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "created": self.created,
            "findings": findings,
        })
    }
}

struct DatasetEntry {
    model_id: String,
    data: Arc<Dataset>,
    running_job: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: String,
    pub dataset: String,
    pub state: JobState,
    pub iteration: u64,
    pub total: u64,
    pub mean_acceptance: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub acceptance: Vec<UnitAcceptance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Vec<ParamSummary>>,
    /// Model registered from the posterior means once the fit is done.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Inner {
    cfg: ServerConfig,
    next_id: AtomicU64,
    models: RwLock<HashMap<String, Arc<Model>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    datasets: Mutex<HashMap<String, DatasetEntry>>,
    jobs: RwLock<HashMap<String, Arc<Mutex<Job>>>>,
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(cfg: ServerConfig) -> Self {
        Self(Arc::new(Inner {
            cfg,
            next_id: AtomicU64::new(1),
            models: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            datasets: Mutex::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
        }))
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.0.next_id.fetch_add(1, Ordering::Relaxed))
    }

    /// Registers a model under `id`, replacing any model of that name.
    pub fn insert_model(&self, id: impl Into<String>, model: Model) {
        self.0.models.write().unwrap().insert(id.into(), Arc::new(model));
    }

    fn model(&self, id: &str) -> ApiResult<Arc<Model>> {
        self.0.models.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::NotFound {
            what: "model",
            id: id.to_string(),
        })
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.0.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::NotFound {
            what: "session",
            id: id.to_string(),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/findings/{var}", put(put_finding).delete(delete_finding))
        .route("/sessions/{id}/posteriors", get(posteriors))
        .route("/sessions/{id}/whatif/{var}", get(whatif))
        .route("/datasets", post(create_dataset))
        .route("/fit", post(start_fit))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Deserialize)]
struct CreateModel {
    id: Option<String>,
    /// Model-file text.
    model: Option<String>,
    /// Prior-file text; defaults when absent.
    priors: Option<String>,
    /// Parameters to build CPTs at; prior means when absent.
    params: Option<crate::NetworkParams>,
    /// A ready discretized network instead of a model file.
    net: Option<crate::inference::DiscretizedNet>,
}

async fn create_model(State(st): State<AppState>, Json(req): Json<CreateModel>) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let model = blocking(move || {
        let m = match (req.net, req.model) {
            (Some(net), None) => Model::from_net(net),
            (None, Some(text)) => Model::from_text(&text, req.priors.as_deref(), req.params),
            _ => return Err(ApiError::bad("invalid_model", "provide exactly one of `model` or `net`")),
        };
        m.map(|m| (req.id, m))
            .map_err(|e| ApiError::bad("invalid_model", e.to_string()))
    })
    .await?;
    let (id, model) = model;
    let id = id.unwrap_or_else(|| st.fresh_id("m"));
    let body = model_view(&id, &model);
    st.insert_model(id, model);
    Ok((StatusCode::CREATED, Json(body)))
}

fn model_view(id: &str, m: &Model) -> JsonValue {
    let net = &m.net;
    let variables: Vec<JsonValue> = net
        .variables()
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "cnode": v.cnode,
                "n_states": v.n_states,
                "labels": v.labels,
                "edges": v.edges,
                "scale": v.scale,
            })
        })
        .collect();
    json!({
        "id": id,
        "n_variables": net.len(),
        "diseases": m.diseases().iter().map(|&d| net.var(d).name.clone()).collect::<Vec<_>>(),
        "variables": variables,
        "fittable": m.spec.is_some(),
    })
}

async fn get_model(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let m = st.model(&id)?;
    Ok(Json(model_view(&id, &m)))
}

#[derive(Deserialize, Default)]
struct CreateSession {
    model: Option<String>,
    n_samples: Option<usize>,
    seed: Option<u64>,
}

async fn create_session(
    State(st): State<AppState>,
    body: Option<Json<CreateSession>>,
) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let req = body.map(|b| b.0).unwrap_or_default();
    let model_id = match req.model {
        Some(m) => m,
        None => {
            let models = st.0.models.read().unwrap();
            if models.contains_key("default") || models.len() != 1 {
                "default".to_string()
            } else {
                models.keys().next().unwrap().clone()
            }
        }
    };
    let model = st.model(&model_id)?;
    let n_samples = req.n_samples.unwrap_or(st.0.cfg.n_samples);
    if n_samples == 0 {
        return Err(ApiError::bad("invalid_config", "n_samples must be at least 1"));
    }
    let id = st.fresh_id("s");
    let session = Session {
        model_id,
        model,
        evidence: Evidence::new(),
        n_samples,
        seed: req.seed.unwrap_or(st.0.cfg.seed),
        created: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    let body = session.view(&id);
    st.0.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let s = st.session(&id)?;
    let body = s.lock().unwrap().view(&id);
    Ok(Json(body))
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    st.0.sessions
        .write()
        .unwrap()
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or(ApiError::NotFound { what: "session", id })
}

fn var_index(model: &Model, name: &str) -> ApiResult<usize> {
    model.net.index_of(name).ok_or_else(|| ApiError::BadRequest {
        code: "unknown_variable",
        message: format!("unknown variable `{name}`"),
        variable: Some(name.to_string()),
    })
}

async fn put_finding(
    State(st): State<AppState>,
    Path((id, var)): Path<(String, String)>,
    Json(body): Json<JsonValue>,
) -> ApiResult<Json<JsonValue>> {
    let s = st.session(&id)?;
    let mut s = s.lock().unwrap();
    let v = var_index(&s.model, &var)?;
    let value = match &body {
        JsonValue::Object(m) if m.contains_key("value") => &m["value"],
        other => other,
    };
    let state = Evidence::finding_state(&s.model.net, v, value)?;
    s.evidence.set(v, state);
    Ok(Json(s.view(&id)))
}

async fn delete_finding(
    State(st): State<AppState>,
    Path((id, var)): Path<(String, String)>,
) -> ApiResult<Json<JsonValue>> {
    let s = st.session(&id)?;
    let mut s = s.lock().unwrap();
    let v = var_index(&s.model, &var)?;
    s.evidence.remove(v);
    Ok(Json(s.view(&id)))
}

struct Snapshot {
    model: Arc<Model>,
    evidence: Evidence,
    n_samples: usize,
    seed: u64,
}

fn snapshot(st: &AppState, id: &str) -> ApiResult<(Snapshot, Arc<Mutex<Session>>)> {
    let s = st.session(id)?;
    let snap = {
        let g = s.lock().unwrap();
        Snapshot {
            model: g.model.clone(),
            evidence: g.evidence.clone(),
            n_samples: g.n_samples,
            seed: g.query_seed(&g.evidence),
        }
    };
    Ok((snap, s))
}

fn ranking_of(model: &Model, diseases: &[usize], marginals: &[Marginal]) -> Vec<RankedDisease> {
    let mut out: Vec<RankedDisease> = diseases
        .iter()
        .filter_map(|&d| {
            let name = &model.net.var(d).name;
            let m = marginals.iter().find(|m| &m.variable == name)?;
            Some(RankedDisease {
                variable: name.clone(),
                probability: (1.0 - m.probs[model.net.var(d).neutral_state()]).max(0.0),
            })
        })
        .collect();
    out.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.variable.cmp(&b.variable)));
    out
}

async fn posteriors(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<JsonValue>> {
    let (snap, _) = snapshot(&st, &id)?;
    let requested: Vec<usize> = match q.get("vars") {
        Some(list) if !list.trim().is_empty() => list
            .split(',')
            .map(|n| var_index(&snap.model, n.trim()))
            .collect::<ApiResult<_>>()?,
        _ => Vec::new(),
    };
    blocking(move || {
        let diseases = snap.model.diseases();
        let queries: Vec<usize> = requested
            .iter()
            .chain(diseases.iter())
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let res = lw_posterior(&snap.model.net, &snap.evidence, &queries, snap.n_samples, snap.seed)?;
        if !res.is_ok() {
            return Err(ApiError::Impossible(res.status));
        }
        let ranking = ranking_of(&snap.model, &diseases, &res.marginals);
        let shown: Vec<&Marginal> = if requested.is_empty() {
            res.marginals.iter().collect()
        } else {
            requested
                .iter()
                .filter_map(|&v| res.marginals.iter().find(|m| m.variable == snap.model.net.var(v).name))
                .collect()
        };
        Ok(Json(json!({
            "status": res.status,
            "method": res.method,
            "n_samples": res.n_samples,
            "ess": res.ess,
            "marginals": shown,
            "ranking": ranking,
        })))
    })
    .await
}

async fn whatif(State(st): State<AppState>, Path((id, var)): Path<(String, String)>) -> ApiResult<Json<JsonValue>> {
    let (snap, session) = snapshot(&st, &id)?;
    let t = var_index(&snap.model, &var)?;
    if snap.evidence.get(t).is_some() {
        return Err(ApiError::BadRequest {
            code: "already_observed",
            message: format!("`{var}` already has a finding"),
            variable: Some(var),
        });
    }
    blocking(move || {
        let net = &snap.model.net;
        let diseases: Vec<usize> = snap.model.diseases().into_iter().filter(|&d| d != t).collect();
        let mut queries = diseases.clone();
        queries.push(t);
        let current = lw_posterior(net, &snap.evidence, &queries, snap.n_samples, snap.seed)?;
        if !current.is_ok() {
            return Err(ApiError::Impossible(current.status));
        }
        let disease_vec = |marg: &[Marginal]| -> Vec<f64> {
            diseases
                .iter()
                .map(|&d| {
                    let m = marg.iter().find(|m| m.variable == net.var(d).name).unwrap();
                    (1.0 - m.probs[net.var(d).neutral_state()]).max(0.0)
                })
                .collect()
        };
        let cur_vec = disease_vec(&current.marginals);
        let predictive = current.marginal(&net.var(t).name).unwrap().to_vec();
        let seed_of = {
            let s = session.lock().unwrap();
            move |e: &Evidence| s.query_seed(e)
        };
        let mut mixture = vec![0.0; diseases.len()];
        let mut outcomes = Vec::new();
        for (state, &p) in predictive.iter().enumerate() {
            let mut ev = snap.evidence.clone();
            ev.set(t, state);
            let cond = if p > 0.0 {
                let r = lw_posterior(net, &ev, &diseases, snap.n_samples, seed_of(&ev))?;
                r.is_ok().then(|| disease_vec(&r.marginals))
            } else {
                None
            };
            if let Some(c) = &cond {
                for (m, x) in mixture.iter_mut().zip(c) {
                    *m += p * x;
                }
            }
            outcomes.push(json!({
                "state": state,
                "label": net.var(t).labels.get(state),
                "probability": p,
                "diseases": cond,
            }));
        }
        let deviation = mixture
            .iter()
            .zip(&cur_vec)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(Json(json!({
            "variable": net.var(t).name,
            "diseases": diseases.iter().map(|&d| net.var(d).name.clone()).collect::<Vec<_>>(),
            "current": cur_vec,
            "outcomes": outcomes,
            "mixture": mixture,
            "mixture_max_deviation": deviation,
        })))
    })
    .await
}

#[derive(Deserialize)]
struct CreateDataset {
    model: Option<String>,
    csv: String,
    missing_sentinel: Option<String>,
}

async fn create_dataset(
    State(st): State<AppState>,
    Json(req): Json<CreateDataset>,
) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let model_id = req.model.unwrap_or_else(|| "default".into());
    let model = st.model(&model_id)?;
    let spec = model
        .spec
        .as_ref()
        .ok_or_else(|| ApiError::bad("not_fittable", "model was loaded without a model file"))?;
    let opts = LoadOptions {
        missing_sentinel: req.missing_sentinel.or(Some("NA".into())),
    };
    let data = read_csv(req.csv.as_bytes(), spec, &opts).map_err(|e| ApiError::bad("invalid_dataset", e.to_string()))?;
    let id = st.fresh_id("d");
    let body = json!({
        "id": id,
        "model": model_id,
        "records": data.n_records(),
        "missing_cells": data.missing_count(),
        "clamped": data.clamped,
        "unmapped_columns": data.unmapped_columns,
        "unobserved_variables": data.completely_unobserved().iter().map(|&v| spec.var(v).name.clone()).collect::<Vec<_>>(),
    });
    st.0.datasets.lock().unwrap().insert(
        id,
        DatasetEntry {
            model_id,
            data: Arc::new(data),
            running_job: None,
        },
    );
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Deserialize)]
struct StartFit {
    dataset: String,
    priors: Option<String>,
    iterations: Option<u64>,
    burn_in: Option<u64>,
    thin: Option<u64>,
    seed: Option<u64>,
}

async fn start_fit(State(st): State<AppState>, Json(req): Json<StartFit>) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let defaults = McmcConfig::default();
    let cfg = McmcConfig {
        iterations: req.iterations.unwrap_or(defaults.iterations),
        burn_in: req.burn_in.unwrap_or(defaults.burn_in),
        thin: req.thin.unwrap_or(defaults.thin),
        seed: req.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    cfg.validate().map_err(|e| ApiError::bad("invalid_config", e.to_string()))?;

    let job_id = st.fresh_id("j");
    let (model_id, data) = {
        let mut ds = st.0.datasets.lock().unwrap();
        let entry = ds.get_mut(&req.dataset).ok_or_else(|| ApiError::NotFound {
            what: "dataset",
            id: req.dataset.clone(),
        })?;
        if let Some(j) = &entry.running_job {
            return Err(ApiError::Conflict(format!("job `{j}` is already fitting dataset `{}`", req.dataset)));
        }
        entry.running_job = Some(job_id.clone());
        (entry.model_id.clone(), entry.data.clone())
    };
    let release = |st: &AppState, dataset: &str| {
        if let Some(e) = st.0.datasets.lock().unwrap().get_mut(dataset) {
            e.running_job = None;
        }
    };
    let model = match st.model(&model_id) {
        Ok(m) => m,
        Err(e) => {
            release(&st, &req.dataset);
            return Err(e);
        }
    };
    let spec = model.spec.clone().expect("datasets are only created for fittable models");
    let priors = match req.priors.as_deref() {
        Some(text) => match parse_priors(text, &spec) {
            Ok(p) => p,
            Err(e) => {
                release(&st, &req.dataset);
                return Err(ApiError::bad("invalid_priors", e.to_string()));
            }
        },
        None => model.priors.clone().unwrap_or_else(|| crate::PriorSpec::defaults(&spec)),
    };

    let job = Arc::new(Mutex::new(Job {
        id: job_id.clone(),
        dataset: req.dataset.clone(),
        state: JobState::Running,
        iteration: 0,
        total: cfg.iterations,
        mean_acceptance: 0.0,
        acceptance: Vec::new(),
        summary: None,
        model: None,
        error: None,
    }));
    st.0.jobs.write().unwrap().insert(job_id.clone(), job.clone());

    let st2 = st.clone();
    let dataset = req.dataset.clone();
    tokio::task::spawn_blocking(move || {
        let progress_job = job.clone();
        let progress = move |p: &crate::mcmc::Progress| {
            let mut j = progress_job.lock().unwrap();
            j.iteration = p.iteration;
            j.mean_acceptance = p.mean_acceptance;
        };
        let out = run_chain(&spec, None, &priors, &data, &cfg, 0, Some(&progress)).and_then(|chain| {
            let means = crate::mcmc::posterior_mean_params(&spec, &priors, &chain)?;
            Ok((chain, means))
        });
        let mut j = job.lock().unwrap();
        match out {
            Ok((chain, means)) => {
                let fitted = model.text.as_deref().map(|text| Model::from_text(text, None, Some(means.clone())));
                match fitted {
                    Some(Ok(mut m)) => {
                        m.priors = Some(priors);
                        let id = format!("{}-fit-{}", model_id, j.id);
                        st2.insert_model(id.clone(), m);
                        j.model = Some(id);
                    }
                    Some(Err(e)) => j.error = Some(e.to_string()),
                    None => {}
                }
                j.summary = Some(posterior_summary(&chain));
                j.acceptance = chain.acceptance;
                j.state = JobState::Done;
            }
            Err(e) => {
                j.state = JobState::Failed;
                j.error = Some(e.to_string());
            }
        }
        drop(j);
        release(&st2, &dataset);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"job": job_id, "dataset": req.dataset, "state": JobState::Running}))))
}

async fn get_job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    let job = st.0.jobs.read().unwrap().get(&id).cloned().ok_or_else(|| ApiError::NotFound {
        what: "job",
        id: id.clone(),
    })?;
    let j = job.lock().unwrap().clone();
    Ok(Json(j))
}
