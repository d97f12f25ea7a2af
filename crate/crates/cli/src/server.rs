//! HTTP surface of a running stack: JSON-RPC tool gateway, intents with a
//! server-sent event trace stream, approvals, schedules, telemetry
//! collections, subscriptions and the virtual clock.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::Stream;
use netintent_core::agent::{IntentSession, TranscriptEntry};
use netintent_core::exposure::{EventFilter, ExposureError, Sink};
use netintent_core::gateway::rpc;
use netintent_core::stack::{ConfigError, Stack, StackConfig};
use netintent_core::store::{DimsFilter, Order, Query as StoreQuery, StoreError};
use netintent_core::tools::{ApprovalError, ApprovalState, Decision};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::watch;

const DEFAULT_RECORD_LIMIT: usize = 100;
const DEFAULT_BATCH_PERIOD_MS: u64 = 1000;

#[derive(Clone)]
pub struct AppState {
    pub stack: Arc<Stack>,
    /// Bumped on every transcript append of any intent.
    pub traces: Arc<watch::Sender<u64>>,
}

impl AppState {
    pub fn build(cfg: &StackConfig) -> Result<Self, ConfigError> {
        let traces = Arc::new(watch::Sender::new(0u64));
        let hook = traces.clone();
        let stack = Stack::build_with(cfg, move |service| {
            service.with_transcript_hook(move |_, _| hook.send_modify(|g| *g += 1))
        })?;
        Ok(Self {
            stack: Arc::new(stack),
            traces,
        })
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<ApprovalError> for ApiError {
    fn from(e: ApprovalError) -> Self {
        let status = match e {
            ApprovalError::Unknown(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::CONFLICT,
        };
        Self::new(status, e.to_string())
    }
}

impl From<ExposureError> for ApiError {
    fn from(e: ExposureError) -> Self {
        match e {
            ExposureError::UnknownSubscription(_) => Self::not_found(e.to_string()),
            _ => Self::bad_request(e.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownCollection(_) => Self::not_found(e.to_string()),
            StoreError::ZeroLimit | StoreError::Malformed(_) => Self::bad_request(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/rpc", post(rpc_call))
        .route("/intents", post(submit_intent).get(list_intents))
        .route("/intents/{id}", get(intent_status))
        .route("/intents/{id}/trace", get(intent_trace))
        .route("/intents/{id}/stream", get(intent_stream))
        .route("/intents/{id}/stop", post(stop_intent))
        .route("/approvals", get(list_approvals))
        .route("/approvals/{token}", post(resolve_approval))
        .route("/schedules", get(schedules))
        .route("/collections", get(collections))
        .route("/collections/{name}/records", get(records))
        .route("/subscriptions", post(subscribe).get(list_subscriptions))
        .route("/subscriptions/{id}", delete(unsubscribe))
        .route("/subscriptions/{id}/notifications", get(drain_notifications))
        .route("/clock", get(clock))
        .route("/clock/advance", post(advance_clock))
        .with_state(state)
}

/// Serves until ctrl-c. With `realtime`, one tick elapses per `tick_ms` of wall time.
pub async fn serve(listener: TcpListener, state: AppState, realtime: bool) -> std::io::Result<()> {
    if realtime {
        let engine = state.stack.engine.clone();
        let tick_ms = engine.read().sim.clock().tick_ms();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(Duration::from_millis(tick_ms));
            interval.tick().await;
            loop {
                interval.tick().await;
                let engine = engine.clone();
                if tokio::task::spawn_blocking(move || engine.write(|e| e.tick())).await.is_err() {
                    break;
                }
            }
        });
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn rpc_call(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let gateway = s.stack.gateway.clone();
    Ok(Json(blocking(move || rpc::handle_bytes(&gateway, &body)).await?))
}

#[derive(Deserialize)]
struct SubmitBody {
    text: String,
}

async fn submit_intent(State(s): State<AppState>, Json(body): Json<SubmitBody>) -> ApiResult<impl IntoResponse> {
    if body.text.trim().is_empty() {
        return Err(ApiError::bad_request("intent text must not be empty"));
    }
    let session = s
        .stack
        .intents
        .submit(body.text.trim())
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "intent_id": session.intent_id, "status": session.status().status })),
    ))
}

async fn list_intents(State(s): State<AppState>) -> Json<Value> {
    Json(json!(s.stack.intents.list()))
}

fn session(s: &AppState, id: &str) -> ApiResult<Arc<IntentSession>> {
    s.stack
        .intents
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown intent '{id}'")))
}

async fn intent_status(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(session(&s, &id)?.status())))
}

async fn intent_trace(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = session(&s, &id)?;
    Ok(Json(json!({
        "intent_id": session.intent_id,
        "status": session.status().status,
        "entries": session.transcript.entries(),
    })))
}

async fn stop_intent(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let status = s
        .stack
        .intents
        .stop(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown intent '{id}'")))?;
    Ok(Json(json!(status)))
}

struct TraceCursor {
    session: Arc<IntentSession>,
    next: usize,
    changes: watch::Receiver<u64>,
    pending: VecDeque<TranscriptEntry>,
    done: bool,
}

fn entry_event(entry: &TranscriptEntry) -> Event {
    let kind = serde_json::to_value(entry.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_else(|| "entry".into());
    Event::default()
        .id(entry.seq.to_string())
        .event(kind)
        .data(serde_json::to_string(entry).unwrap_or_default())
}

/// Entries as they are appended, resuming after `Last-Event-ID` (or `?from=`);
/// ends with an `end` event carrying the final status.
fn trace_stream(cursor: TraceCursor) -> impl Stream<Item = Result<Event, Infallible>> {
    futures::stream::unfold(cursor, |mut c| async move {
        loop {
            if let Some(entry) = c.pending.pop_front() {
                return Some((Ok(entry_event(&entry)), c));
            }
            if c.done {
                return None;
            }
            c.changes.borrow_and_update();
            let finished = c.session.outcome().is_some();
            let fresh = c.session.transcript.entries_from(c.next);
            if !fresh.is_empty() {
                c.next += fresh.len();
                c.pending.extend(fresh);
                continue;
            }
            if finished {
                c.done = true;
                let status = json!(c.session.status());
                return Some((Ok(Event::default().event("end").data(status.to_string())), c));
            }
            if let Ok(Err(_)) = tokio::time::timeout(Duration::from_secs(1), c.changes.changed()).await {
                tokio::time::sleep(Duration::from_millis(200)).await;
            }
        }
    })
}

#[derive(Deserialize)]
struct StreamParams {
    from: Option<usize>,
}

async fn intent_stream(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<StreamParams>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let session = session(&s, &id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|last| last + 1);
    let cursor = TraceCursor {
        session,
        next: resume.or(params.from).unwrap_or(0),
        changes: s.traces.subscribe(),
        pending: VecDeque::new(),
        done: false,
    };
    Ok(Sse::new(trace_stream(cursor)).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
struct ApprovalQuery {
    state: Option<ApprovalState>,
}

async fn list_approvals(State(s): State<AppState>, Query(q): Query<ApprovalQuery>) -> Json<Value> {
    let engine = s.stack.engine.read();
    let tokens: Vec<_> = engine
        .approvals
        .all()
        .filter(|t| q.state.is_none_or(|st| t.state == st))
        .cloned()
        .collect();
    Json(json!(tokens))
}

#[derive(Deserialize)]
struct DecisionBody {
    decision: Decision,
}

async fn resolve_approval(
    State(s): State<AppState>,
    Path(token): Path<String>,
    Json(body): Json<DecisionBody>,
) -> ApiResult<Json<Value>> {
    let resolved = s.stack.engine.write(|e| e.resolve_approval(&token, body.decision))?;
    Ok(Json(json!(resolved)))
}

async fn schedules(State(s): State<AppState>) -> Json<Value> {
    let engine = s.stack.engine.read();
    let actions: Vec<_> = engine.scheduler.actions().cloned().collect();
    Json(json!({ "actions": actions, "history": engine.scheduler.history() }))
}

async fn collections(State(s): State<AppState>) -> Json<Value> {
    Json(json!(s.stack.engine.read().store.list_collections()))
}

#[derive(Deserialize)]
struct RecordParams {
    slice: Option<String>,
    supi: Option<String>,
    session_id: Option<u64>,
    limit: Option<usize>,
    order: Option<Order>,
}

async fn records(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Query(p): Query<RecordParams>,
) -> ApiResult<Json<Value>> {
    let query = StoreQuery {
        collection: name,
        dims_filter: DimsFilter {
            slice: p.slice,
            supi: p.supi,
            session_id: p.session_id,
        },
        limit: p.limit.unwrap_or(DEFAULT_RECORD_LIMIT),
        order: p.order.unwrap_or_default(),
    };
    let records = s.stack.engine.read().store.query(&query)?;
    Ok(Json(json!(records)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubscribeBody {
    #[serde(default)]
    filter: EventFilter,
    sink: Sink,
    batch_period_ms: Option<u64>,
}

async fn subscribe(State(s): State<AppState>, Json(body): Json<SubscribeBody>) -> ApiResult<impl IntoResponse> {
    if body.sink == Sink::Store {
        return Err(ApiError::bad_request("the store sink is reserved for the built-in subscription"));
    }
    let sub_id = s.stack.engine.write(|e| {
        e.exposure
            .subscribe(body.filter, body.sink, body.batch_period_ms.unwrap_or(DEFAULT_BATCH_PERIOD_MS))
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "sub_id": sub_id }))))
}

async fn list_subscriptions(State(s): State<AppState>) -> Json<Value> {
    let engine = s.stack.engine.read();
    let subs: Vec<Value> = engine
        .exposure
        .subscriptions()
        .map(|sub| json!({ "subscription": sub, "stats": engine.exposure.stats(&sub.sub_id) }))
        .collect();
    Json(json!(subs))
}

async fn unsubscribe(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let engine = s.stack.engine.clone();
    let flushed = blocking(move || {
        engine.write(|e| {
            if id == e.store_subscription() {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "the built-in store subscription cannot be removed",
                ));
            }
            e.exposure.unsubscribe(&id).map(|n| (id, n)).map_err(ApiError::from)
        })
    })
    .await??;
    Ok(Json(json!({ "sub_id": flushed.0, "flushed": flushed.1 })))
}

async fn drain_notifications(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let notes = s.stack.engine.write(|e| e.exposure.drain_queue(&id))?;
    Ok(Json(json!(notes)))
}

fn clock_view(s: &AppState) -> Value {
    let engine = s.stack.engine.read();
    let clock = engine.sim.clock();
    json!({
        "now_ms": clock.now_ms(),
        "now": clock.now().to_rfc3339(),
        "epoch": clock.epoch().to_rfc3339(),
        "tick_ms": clock.tick_ms(),
    })
}

async fn clock(State(s): State<AppState>) -> Json<Value> {
    Json(clock_view(&s))
}

#[derive(Deserialize)]
struct AdvanceBody {
    duration_ms: i64,
}

async fn advance_clock(State(s): State<AppState>, Json(body): Json<AdvanceBody>) -> ApiResult<Json<Value>> {
    let Ok(duration_ms) = u64::try_from(body.duration_ms) else {
        return Err(ApiError::bad_request(format!(
            "duration must not be negative (got {} ms)",
            body.duration_ms
        )));
    };
    let engine = s.stack.engine.clone();
    let report = blocking(move || engine.write(|e| e.advance_by_ms(duration_ms))).await?;
    Ok(Json(json!(report)))
}
