//! Route handlers. Each handler parses the request, forwards it to the
//! session engine or the job runner, and serialises what comes back.

use std::convert::Infallible;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use egoassist_core::jobs::{run_bench, save_study_session, BenchKind, BenchRequest};
use egoassist_core::pipelines::PredictorKind;
use egoassist_core::session::{EventKind, NextStep, Session, SessionError, StateSummary};
use egoassist_core::types::{FrameRef, Narration, SuggestionOutcome};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, JobStatus, SessionSlot};

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scripts", get(list_scripts))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/ingest", post(ingest))
        .route("/sessions/{id}/next", post(next_step))
        .route("/sessions/{id}/outcome", post(outcome))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/events", get(events))
        .route("/bench/{kind}", post(start_bench))
        .route("/jobs/{id}", get(get_job))
        .layer(middleware::from_fn_with_state(state.clone(), authenticate))
        .with_state(state)
}

async fn authenticate(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config().service.api_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok && req.uri().path() != "/health" {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptInfo {
    pub script_id: String,
    pub title: String,
    pub goal_text: String,
    pub n_eval: usize,
    pub step_cap: usize,
}

async fn list_scripts(State(state): State<AppState>) -> Json<Vec<ScriptInfo>> {
    Json(
        state
            .scripts()
            .values()
            .map(|s| ScriptInfo {
                script_id: s.script_id.clone(),
                title: s.title.clone(),
                goal_text: s.goal_text.clone(),
                n_eval: s.n_eval,
                step_cap: s.step_cap(),
            })
            .collect(),
    )
}

fn socratic() -> PredictorKind {
    PredictorKind::Socratic
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub script_id: String,
    #[serde(default)]
    pub goal: Option<String>,
    #[serde(default = "socratic")]
    pub predictor: PredictorKind,
    #[serde(default)]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub state: StateSummary,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let Json(req) = body?;
    let script = state
        .scripts()
        .get(&req.script_id)
        .cloned()
        .ok_or_else(|| {
            ApiError::not_found(
                "unknown_script",
                format!("unknown script `{}`", req.script_id),
            )
        })?;
    let id = match req.session_id {
        Some(id) if !valid_session_id(&id) => {
            return Err(ApiError::bad_request(
                "invalid_session_id",
                "session ids use letters, digits, `-`, `_` and `.`",
            ))
        }
        Some(id) => id,
        None => state.generate_session_id(),
    };
    let retry = state.retry_after_s();
    let (st, sid) = (state.clone(), id.clone());
    let summary = tokio::task::spawn_blocking(move || {
        let providers = st
            .config()
            .session_providers(&script, req.predictor)
            .map_err(|e| ApiError::config(&e, retry))?;
        let session = Session::start(
            sid,
            script,
            req.goal.as_deref(),
            st.config().session_config(req.predictor),
            providers,
            st.pool(),
        )
        .map_err(|e| ApiError::session(&e, retry))?;
        let summary = session.summary();
        st.insert_session(session)?;
        Ok::<_, ApiError>(summary)
    })
    .await
    .map_err(|e| ApiError::internal(format!("session setup failed: {e}")))??;
    tracing::info!(session = %id, "session created");
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: id,
            state: summary,
        }),
    ))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(state.session(&id)?.snapshot().view))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestRequest {
    #[serde(default)]
    pub narrations: Vec<Narration>,
    #[serde(default)]
    pub frames: Vec<FrameRef>,
    /// JSON file holding a list of frame references, relative to the run
    /// directory unless absolute.
    #[serde(default)]
    pub frame_batch_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestAccepted {
    pub accepted_narrations: usize,
    pub accepted_frames: usize,
    pub stream_end_s: f64,
}

fn load_frame_batch(run_dir: &FsPath, reference: &str) -> ApiResult<Vec<FrameRef>> {
    let p = PathBuf::from(reference);
    let path = if p.is_absolute() { p } else { run_dir.join(p) };
    let raw = std::fs::read_to_string(&path).map_err(|e| {
        ApiError::bad_request(
            "invalid_ingest",
            format!("frame batch {}: {e}", path.display()),
        )
    })?;
    serde_json::from_str(&raw).map_err(|e| {
        ApiError::bad_request(
            "invalid_ingest",
            format!("frame batch {}: {e}", path.display()),
        )
    })
}

async fn ingest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<IngestRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<IngestAccepted>)> {
    let Json(req) = body?;
    let slot = state.session(&id)?;
    let mut frames = req.frames;
    if let Some(r) = &req.frame_batch_ref {
        frames.extend(load_frame_batch(&state.run_dir(), r)?);
    }
    let narrations = req.narrations;
    if narrations.is_empty() && frames.is_empty() {
        return Err(ApiError::bad_request("invalid_ingest", "nothing to ingest"));
    }
    let (n, f) = (narrations.len(), frames.len());
    let retry = state.retry_after_s();
    let end = slot
        .mutate(move |s| -> Result<f64, SessionError> {
            if !narrations.is_empty() {
                s.ingest_narrations(narrations)?;
            }
            if !frames.is_empty() {
                s.ingest_frames(frames)?;
            }
            Ok(s.stream_end_s())
        })
        .await?
        .map_err(|e| ApiError::session(&e, retry))?;
    Ok((
        StatusCode::ACCEPTED,
        Json(IngestAccepted {
            accepted_narrations: n,
            accepted_frames: f,
            stream_end_s: end,
        }),
    ))
}

fn last_system_error(s: &Session) -> String {
    s.events()
        .events()
        .iter()
        .rev()
        .find_map(|e| match &e.kind {
            EventKind::SystemError { message, .. } => Some(message.clone()),
            _ => None,
        })
        .unwrap_or_default()
}

async fn next_step(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<NextStep>> {
    let slot = state.session(&id)?;
    let retry = state.retry_after_s();
    let (next, message) = slot
        .mutate(|s| s.next_step().map(|n| (n, last_system_error(s))))
        .await?
        .map_err(|e| ApiError::session(&e, retry))?;
    if next.system_error {
        let mut err = ApiError::unavailable(message, retry);
        err.body.next = Some(Box::new(next));
        return Err(err);
    }
    Ok(Json(next))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeRequest {
    #[serde(default)]
    pub index: Option<usize>,
    /// `executed`, `skipped` (with `reason`) or a full skip outcome such as
    /// `skipped_redundant`.
    pub outcome: String,
    #[serde(default)]
    pub reason: Option<String>,
}

fn skip_reason(reason: &str) -> Option<SuggestionOutcome> {
    match reason {
        "redundant" => Some(SuggestionOutcome::SkippedRedundant),
        "infeasible" => Some(SuggestionOutcome::SkippedInfeasible),
        "irrelevant" => Some(SuggestionOutcome::SkippedIrrelevant),
        _ => None,
    }
}

/// Parses the outcome and optional skip reason of an outcome request.
pub fn parse_outcome(outcome: &str, reason: Option<&str>) -> Result<SuggestionOutcome, String> {
    let invalid = |m: String| Err(m);
    match (outcome, reason) {
        ("executed", None) => Ok(SuggestionOutcome::Executed),
        ("executed", Some(_)) => invalid("executed takes no skip reason".into()),
        ("skipped", Some(r)) => skip_reason(r).ok_or_else(|| format!("unknown skip reason `{r}`")),
        ("skipped", None) => {
            invalid("a skip needs a reason: redundant, infeasible or irrelevant".into())
        }
        (o, r) => {
            let parsed = o.strip_prefix("skipped_").and_then(skip_reason);
            match (parsed, r) {
                (Some(p), None) => Ok(p),
                (Some(p), Some(r)) if skip_reason(r) == Some(p) => Ok(p),
                (Some(_), Some(r)) => Err(format!("reason `{r}` contradicts outcome `{o}`")),
                (None, _) => Err(format!("unknown outcome `{o}`")),
            }
        }
    }
}

async fn outcome(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<OutcomeRequest>, JsonRejection>,
) -> ApiResult<Json<StateSummary>> {
    let Json(req) = body?;
    let outcome = parse_outcome(&req.outcome, req.reason.as_deref())
        .map_err(|m| ApiError::bad_request("invalid_outcome", m))?;
    let slot = state.session(&id)?;
    let retry = state.retry_after_s();
    let summary = slot
        .mutate(move |s| s.report_outcome(req.index, outcome).map(|_| s.summary()))
        .await?
        .map_err(|e| ApiError::session(&e, retry))?;
    Ok(Json(summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalizeRequest {
    #[serde(default)]
    pub participant: Option<bool>,
    #[serde(default)]
    pub admin: Option<bool>,
}

fn persist(run_dir: &FsPath, s: &Session) -> std::io::Result<()> {
    if let Some(study) = s.study_session() {
        save_study_session(&run_dir.join("sessions"), &study)?;
        let events = run_dir.join("events");
        std::fs::create_dir_all(&events)?;
        std::fs::write(
            events.join(format!("{}.jsonl", study.report.session_id)),
            s.events().render(),
        )?;
    }
    Ok(())
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<FinalizeRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let slot = state.session(&id)?;
    let retry = state.retry_after_s();
    let run_dir = state.run_dir();
    let report = slot
        .mutate(move |s| {
            let report = s.finalize(req.participant, req.admin)?;
            if let Err(e) = persist(&run_dir, s) {
                tracing::error!(session = %report.session_id, error = %e, "could not persist the finished session");
            }
            Ok::<_, SessionError>(report)
        })
        .await?
        .map_err(|e| ApiError::session(&e, retry))?;
    Ok(Json(report).into_response())
}

async fn report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = state.session(&id)?.snapshot();
    match snap.report {
        Some(r) => Ok(Json(r).into_response()),
        None if snap.view.summary.end_reason.is_none() => Err(ApiError::session(
            &SessionError::NotCompleted,
            state.retry_after_s(),
        )),
        None => Err(ApiError::conflict(
            "not_finalized",
            "session is completed but not rated yet",
        )),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EventsQuery {
    /// Resume after this sequence number.
    #[serde(default)]
    pub after: Option<u64>,
}

fn event_stream(
    slot: Arc<SessionSlot>,
    after: u64,
) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = slot.subscribe();
    stream::unfold(
        (slot, rx, after, false),
        |(slot, mut rx, after, done)| async move {
            if done {
                return None;
            }
            loop {
                rx.borrow_and_update();
                let (batch, final_log) = slot.events_after(after);
                if let Some(last) = batch.last() {
                    let next_after = last.seq;
                    let events: Vec<Result<Event, Infallible>> = batch
                        .iter()
                        .map(|e| {
                            Ok(Event::default()
                                .id(e.seq.to_string())
                                .data(e.to_json_line()))
                        })
                        .collect();
                    return Some((stream::iter(events), (slot, rx, next_after, false)));
                }
                if final_log {
                    return Some((stream::iter(Vec::new()), (slot, rx, after, true)));
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    )
    .flatten()
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<impl IntoResponse> {
    let slot = state.session(&id)?;
    let last_id = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let after = q.after.or(last_id).unwrap_or(0);
    Ok(Sse::new(event_stream(slot, after))
        .keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
    pub status: String,
}

async fn start_bench(
    State(state): State<AppState>,
    Path(kind): Path<String>,
    body: Result<Json<BenchRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<JobAccepted>)> {
    let kind: BenchKind = kind
        .parse()
        .map_err(|m: String| ApiError::not_found("unknown_benchmark", m))?;
    let Json(req) = body?;
    let job_id = state.new_job(kind);
    let run_dir = state.run_dir().join("bench").join(&job_id);
    let (st, id, label) = (state.clone(), job_id.clone(), req.label());
    tokio::spawn(async move {
        let cfg = st.config().clone();
        let result =
            tokio::task::spawn_blocking(move || run_bench(kind, &req, &cfg, Some(run_dir))).await;
        let status = match result {
            Ok(Ok(out)) => JobStatus::Succeeded {
                table: out.table(&label),
                report: out.report,
            },
            Ok(Err(e)) => {
                let err = ApiError::job(&e, 0);
                JobStatus::Failed {
                    code: err.body.code,
                    message: err.body.message,
                    provider: e.is_provider(),
                }
            }
            Err(e) => JobStatus::Failed {
                code: "internal".into(),
                message: e.to_string(),
                provider: false,
            },
        };
        tracing::info!(job = %id, "benchmark job finished");
        st.finish_job(&id, status);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(JobAccepted {
            job_id,
            status: "running".into(),
        }),
    ))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = state
        .job(&id)
        .ok_or_else(|| ApiError::not_found("unknown_job", format!("unknown job `{id}`")))?;
    let mut resp = Json(&job).into_response();
    if let JobStatus::Failed { provider: true, .. } = job.status {
        *resp.status_mut() = StatusCode::SERVICE_UNAVAILABLE;
        resp.headers_mut()
            .insert(header::RETRY_AFTER, state.retry_after_s().into());
    }
    Ok(resp)
}
