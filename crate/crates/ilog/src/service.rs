//! HTTP/JSON service over the experiment store.
//!
//! Writes to one experiment (ingest, revisions, plan and settings changes)
//! are serialized by that experiment's lock; reads share it. Errors are JSON
//! problem records carrying a stable `code`.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ilog_core::context::{ParticipantId, ParticipantProfile};
use ilog_core::predictor::{ClassifierKind, ClassifierSpec, TrainError};
use ilog_core::quality::{QualityParameters, SummaryOptions};
use ilog_core::schedule::{Actor, Revision, RevisionError, RevisionPolicy};
use ilog_core::time::{Date, Timestamp};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use tokio::sync::{watch, RwLock};

use crate::config::{Principal, ServiceConfig};
use crate::experiment::{json_digest, EventBatch, ExpError, Experiment};
use crate::store::{valid_id, Storage, StoreError};

/// Largest accepted request body.
pub const MAX_BODY: usize = 256 << 20;

pub struct AppState {
    store: Arc<dyn Storage>,
    principals: BTreeMap<String, Principal>,
    poll_timeout: Duration,
    slots: Mutex<HashMap<String, Arc<Slot>>>,
}

struct Slot {
    exp: RwLock<Experiment>,
    /// Bumped after every committed write; long polls wait on it.
    changed: watch::Sender<u64>,
}

impl AppState {
    pub fn new(store: Arc<dyn Storage>, config: &ServiceConfig) -> Result<Self, crate::config::ConfigError> {
        Ok(Self {
            store,
            principals: config.principals()?,
            poll_timeout: Duration::from_millis(config.poll_timeout_ms),
            slots: Mutex::new(HashMap::new()),
        })
    }

    fn slot(&self, id: &str, create: bool) -> Result<Arc<Slot>, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::Exp(ExpError::Store(StoreError::InvalidId(id.into()))));
        }
        let mut slots = self.slots.lock().expect("slot map");
        if let Some(s) = slots.get(id) {
            return Ok(Arc::clone(s));
        }
        let exp = match self.store.load(id).map_err(ExpError::from)? {
            Some(stored) => Experiment::restore(id, stored)?,
            None if create => Experiment::new(id),
            None => return Err(ExpError::NotFound(id.into()).into()),
        };
        let slot = Arc::new(Slot { exp: RwLock::new(exp), changed: watch::channel(0).0 });
        slots.insert(id.into(), Arc::clone(&slot));
        Ok(slot)
    }

    fn authenticate(&self, headers: &HeaderMap) -> Result<Actor, ApiError> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::Unauthenticated)?;
        self.principals.get(token.trim()).map(|p| p.role.clone()).ok_or(ApiError::Unauthenticated)
    }
}

#[derive(Debug)]
pub enum ApiError {
    Unauthenticated,
    Exp(ExpError),
}

impl From<ExpError> for ApiError {
    fn from(e: ExpError) -> Self {
        ApiError::Exp(e)
    }
}

/// Status, stable code and any structured detail of an error.
fn classify(e: &ExpError) -> (StatusCode, &'static str, Map<String, Value>) {
    let mut extra = Map::new();
    let (status, code) = match e {
        ExpError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        ExpError::Forbidden(_) => (StatusCode::FORBIDDEN, "forbidden"),
        ExpError::RoleMismatch { .. } => (StatusCode::FORBIDDEN, "role_mismatch"),
        ExpError::NoPlan => (StatusCode::CONFLICT, "no_plan"),
        ExpError::InvalidPlan(d) => {
            extra.insert("diagnostics".into(), json!(d));
            (StatusCode::UNPROCESSABLE_ENTITY, "invalid_plan")
        }
        ExpError::Schema(_) => (StatusCode::UNPROCESSABLE_ENTITY, "schema_error"),
        ExpError::Revision(r) => match r {
            RevisionError::PolicyViolation { actor, limit } => {
                extra.insert("actor".into(), json!(actor));
                extra.insert("limit".into(), json!(limit));
                (StatusCode::CONFLICT, "policy_violation")
            }
            RevisionError::ImmutablePast { .. } => (StatusCode::CONFLICT, "immutable_past"),
            RevisionError::UnknownTarget(_) => (StatusCode::NOT_FOUND, "unknown_target"),
            RevisionError::UnknownParticipant(_) => (StatusCode::NOT_FOUND, "unknown_participant"),
            RevisionError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_revision"),
        },
        ExpError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
        ExpError::Train(TrainError::DegenerateData(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate_data"),
        ExpError::Train(_) => (StatusCode::BAD_REQUEST, "bad_classifier"),
        ExpError::Store(StoreError::InvalidId(_)) => (StatusCode::BAD_REQUEST, "invalid_experiment_id"),
        ExpError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
    };
    (status, code, extra)
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, detail, extra) = match &self {
            ApiError::Unauthenticated => {
                (StatusCode::UNAUTHORIZED, "unauthenticated", "missing or unknown bearer token".to_string(), Map::new())
            }
            ApiError::Exp(e) => {
                let (s, c, x) = classify(e);
                (s, c, e.to_string(), x)
            }
        };
        let mut body = Map::new();
        body.insert("type".into(), json!(format!("urn:ilog:problem:{code}")));
        body.insert("title".into(), json!(status.canonical_reason().unwrap_or("error")));
        body.insert("status".into(), json!(status.as_u16()));
        body.insert("code".into(), json!(code));
        body.insert("detail".into(), json!(detail));
        body.extend(extra);
        (status, [(header::CONTENT_TYPE, "application/problem+json")], Value::Object(body).to_string()).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;
type Shared = State<Arc<AppState>>;
type Params = Query<HashMap<String, String>>;

fn ok<T: Serialize>(value: &T) -> ApiResult {
    Ok(Json(value).into_response())
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ExpError::Schema(format!("request body: {e}")).into())
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    q.get(name)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|e| ExpError::BadRequest(format!("query parameter {name}: {e}")).into()))
        .transpose()
}

fn subject(q: &HashMap<String, String>) -> Option<ParticipantId> {
    q.get("participant").filter(|v| !v.is_empty()).map(ParticipantId::new)
}

impl AppState {
    async fn read<T>(&self, id: &str, f: impl FnOnce(&Experiment) -> Result<T, ExpError>) -> Result<T, ApiError> {
        let slot = self.slot(id, false)?;
        let exp = slot.exp.read().await;
        Ok(f(&exp)?)
    }

    async fn write<T>(
        &self,
        id: &str,
        create: bool,
        f: impl FnOnce(&mut Experiment, &dyn Storage) -> Result<T, ExpError>,
    ) -> Result<T, ApiError> {
        let slot = self.slot(id, create)?;
        let mut exp = slot.exp.write().await;
        let out = f(&mut exp, &*self.store)?;
        slot.changed.send_modify(|n| *n += 1);
        Ok(out)
    }
}

async fn health() -> &'static str {
    "ok"
}

async fn list_experiments(State(s): Shared, headers: HeaderMap) -> ApiResult {
    match s.authenticate(&headers)? {
        Actor::Researcher => ok(&s.store.list().map_err(ExpError::from)?),
        other => Err(ExpError::Forbidden(format!("{other} cannot list experiments")).into()),
    }
}

async fn get_plan(State(s): Shared, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    s.authenticate(&headers)?;
    let text = s.read(&id, |e| e.plan_text().map(str::to_string).ok_or(ExpError::NoPlan)).await?;
    Ok(([(header::CONTENT_TYPE, "text/calendar; charset=utf-8")], text).into_response())
}

async fn put_plan(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: String) -> ApiResult {
    let who = s.authenticate(&headers)?;
    if who != Actor::Researcher {
        return Err(ExpError::Forbidden(format!("{who} cannot replace the plan")).into());
    }
    let (warnings, generation) = s
        .write(&id, true, |e, store| {
            let w = e.put_plan(store, &who, body)?;
            Ok((w, e.settings().generation))
        })
        .await?;
    ok(&json!({ "generation": generation, "warnings": warnings }))
}

async fn get_participants(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let subject = subject(&q);
    ok(&s.read(&id, |e| e.get_participants(&who, subject.as_ref())).await?)
}

async fn put_participants(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let who = s.authenticate(&headers)?;
    if who != Actor::Researcher {
        return Err(ExpError::Forbidden(format!("{who} cannot replace the participant list")).into());
    }
    let list: Vec<ParticipantProfile> = parse_body(&body)?;
    let generation = s
        .write(&id, true, |e, store| {
            e.put_participants(store, &who, list)?;
            Ok(e.settings().generation)
        })
        .await?;
    ok(&json!({ "generation": generation }))
}

async fn get_timeline(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let p = subject(&q);
    ok(&s.read(&id, |e| e.timeline_view(&who, p.as_ref())).await?)
}

async fn post_events(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let batch: EventBatch = parse_body(&body)?;
    ok(&s.write(&id, false, |e, store| e.ingest(store, &who, batch)).await?)
}

async fn get_summary(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let subject = subject(&q);
    let now: Option<Timestamp> = param(&q, "now")?;
    ok(&s.read(&id, |e| e.summary(&who, subject.as_ref(), now)).await?)
}

async fn get_heatmap(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let from: Option<Date> = param(&q, "from")?;
    let to: Option<Date> = param(&q, "to")?;
    let subject = subject(&q);
    ok(&s.read(&id, |e| e.heatmap(&who, subject.as_ref(), from, to)).await?)
}

async fn get_participant_data(
    State(s): Shared,
    Path((id, pid)): Path<(String, String)>,
    headers: HeaderMap,
    Query(q): Params,
) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let from: u64 = param(&q, "offset")?.unwrap_or(0);
    let limit: usize = param::<usize>(&q, "limit")?.unwrap_or(1000).clamp(1, 10_000);
    ok(&s.read(&id, |e| e.participant_data(&who, &ParticipantId::new(pid), from, limit)).await?)
}

async fn get_compare(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let pids: Vec<ParticipantId> = q
        .get("pids")
        .map(|v| v.split(',').map(str::trim).filter(|p| !p.is_empty()).map(ParticipantId::new).collect())
        .unwrap_or_default();
    if pids.is_empty() {
        return Err(ExpError::BadRequest("pids must list at least one participant".into()).into());
    }
    let now: Option<Timestamp> = param(&q, "now")?;
    ok(&s.read(&id, |e| e.compare(&who, &pids, now)).await?)
}

async fn post_revision(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let rev: Revision = parse_body(&body)?;
    ok(&s.write(&id, false, |e, store| e.revise(store, &who, rev)).await?)
}

/// Long poll: returns as soon as something visible to the caller lies at or
/// past `offset`, or when `wait_ms` runs out.
async fn get_stream(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let from: u64 = param(&q, "offset")?.unwrap_or(0);
    let wait = param::<u64>(&q, "wait_ms")?.map_or(s.poll_timeout, |ms| Duration::from_millis(ms).min(s.poll_timeout));
    let subject = subject(&q);
    let slot = s.slot(&id, false)?;
    let deadline = tokio::time::Instant::now() + wait;
    let mut rx = slot.changed.subscribe();
    let mut cursor = from;
    loop {
        rx.borrow_and_update();
        let page = {
            let exp = slot.exp.read().await;
            exp.stream(&who, subject.as_ref(), cursor)?
        };
        let done = !page.records.is_empty() || !page.flags.is_empty() || tokio::time::Instant::now() >= deadline;
        if done {
            return ok(&crate::experiment::StreamPage { from, ..page });
        }
        cursor = page.next_offset;
        if tokio::time::timeout_at(deadline, rx.changed()).await.is_err() {
            let exp = slot.exp.read().await;
            return ok(&crate::experiment::StreamPage { from, ..exp.stream(&who, subject.as_ref(), cursor)? });
        }
    }
}

async fn get_quality(State(s): Shared, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    s.authenticate(&headers)?;
    ok(&s.read(&id, |e| Ok(*e.quality())).await?)
}

async fn put_quality(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let params: QualityParameters = parse_body(&body)?;
    s.write(&id, false, |e, store| e.put_settings(store, &who, |st| st.quality = params)).await?;
    ok(&params)
}

async fn get_policy(State(s): Shared, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    s.authenticate(&headers)?;
    ok(&s.read(&id, |e| Ok(e.settings().policy.clone())).await?)
}

async fn put_policy(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let policy: RevisionPolicy = parse_body(&body)?;
    let echo = policy.clone();
    s.write(&id, false, |e, store| e.put_settings(store, &who, |st| st.policy = policy)).await?;
    ok(&echo)
}

async fn get_summary_options(State(s): Shared, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    s.authenticate(&headers)?;
    ok(&s.read(&id, |e| Ok(e.settings().summary)).await?)
}

async fn put_summary_options(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let options: SummaryOptions = parse_body(&body)?;
    s.write(&id, false, |e, store| e.put_settings(store, &who, |st| st.summary = options)).await?;
    ok(&options)
}

async fn get_reports(State(s): Shared, Path(id): Path<String>, headers: HeaderMap, Query(q): Params) -> ApiResult {
    let who = s.authenticate(&headers)?;
    let now: Option<Timestamp> = param(&q, "now")?;
    let spec = match param::<ClassifierKind>(&q, "classifier").map_err(|_| {
        ApiError::Exp(ExpError::Train(TrainError::UnknownClassifier(q.get("classifier").cloned().unwrap_or_default())))
    })? {
        Some(kind) => Some(ClassifierSpec::new(kind, param(&q, "seed")?.unwrap_or(0))),
        None => None,
    };
    let store = Arc::clone(&s.store);
    let report = s
        .read(&id, |e| {
            let r = e.report(&who, now, spec.as_ref())?;
            let body = serde_json::to_vec_pretty(&r).expect("report serializes");
            store.write_snapshot(&id, &format!("report-{}-g{}-v{}.json", r.as_of_offset, r.generation, r.timeline_version), &body)?;
            Ok(r)
        })
        .await?;
    ok(&report)
}

async fn get_digest(State(s): Shared, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let who = s.authenticate(&headers)?;
    if who != Actor::Researcher {
        return Err(ExpError::Forbidden(format!("{who} cannot read the digest")).into());
    }
    let body = s
        .read(&id, |e| {
            Ok(json!({
                "offset": e.offset(),
                "generation": e.settings().generation,
                "version": e.version(),
                "digest": e.digest(),
                "flags": json_digest(&e.flags()),
            }))
        })
        .await?;
    ok(&body)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/experiments", get(list_experiments))
        .route("/experiments/{id}/plan", get(get_plan).put(put_plan))
        .route("/experiments/{id}/participants", get(get_participants).put(put_participants))
        .route("/experiments/{id}/timeline", get(get_timeline))
        .route("/experiments/{id}/events", post(post_events))
        .route("/experiments/{id}/summary", get(get_summary))
        .route("/experiments/{id}/heatmap", get(get_heatmap))
        .route("/experiments/{id}/participants/{pid}/data", get(get_participant_data))
        .route("/experiments/{id}/compare", get(get_compare))
        .route("/experiments/{id}/revisions", post(post_revision))
        .route("/experiments/{id}/stream", get(get_stream))
        .route("/experiments/{id}/quality-params", get(get_quality).put(put_quality))
        .route("/experiments/{id}/policy", get(get_policy).put(put_policy))
        .route("/experiments/{id}/summary-options", get(get_summary_options).put(put_summary_options))
        .route("/experiments/{id}/reports", get(get_reports))
        .route("/experiments/{id}/digest", get(get_digest))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

