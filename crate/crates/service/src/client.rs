//! Blocking API client and a simulated user that drives a session over HTTP.

use std::time::{Duration, Instant};

use egoassist_core::jobs::BenchRequest;
use egoassist_core::pipelines::PredictorKind;
use egoassist_core::providers::Embedder;
use egoassist_core::session::simulate::{
    decide_outcome, partial_progress_narrations, step_narration, MAX_ASSISTANT_ERRORS, STEP_SECONDS,
};
use egoassist_core::session::{NextStep, SessionEvent, SessionReport, SessionState, StateSummary};
use egoassist_core::types::{FrameRef, Narration, SuggestionOutcome};
use egoassist_core::ActivityScript;
use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::error::ErrorBody;
use crate::routes::{Created, IngestAccepted, JobAccepted};
use crate::state::{JobStatus, JobView, SessionView};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("HTTP {status}: {} ({})", body.message, body.code)]
    Api {
        status: StatusCode,
        body: ErrorBody,
        retry_after: Option<u64>,
    },
    #[error("unexpected response: {0}")]
    Decode(String),
    #[error("assistant failed {attempts} times in a row: {message}")]
    AssistantFailed { attempts: usize, message: String },
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("simulated user: {0}")]
    Simulation(String),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            Self::Api { status, .. } => Some(*status),
            _ => None,
        }
    }

    pub fn code(&self) -> Option<&str> {
        match self {
            Self::Api { body, .. } => Some(&body.code),
            _ => None,
        }
    }
}

pub struct ApiClient {
    base: String,
    token: Option<String>,
    http: Client,
}

impl ApiClient {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            token: None,
            http: Client::new(),
        }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    fn request(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        let rb = self.http.request(method, format!("{}{path}", self.base));
        match &self.token {
            Some(t) => rb.bearer_auth(t),
            None => rb,
        }
    }

    fn send(&self, rb: RequestBuilder) -> Result<Response, ClientError> {
        let resp = rb.send()?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok());
        let text = resp.text()?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            code: "unknown".into(),
            message: text,
            retry_after_s: None,
            next: None,
        });
        Err(ClientError::Api {
            status,
            body,
            retry_after,
        })
    }

    fn decode<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
        let bytes = resp.bytes()?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::decode(self.send(self.request(reqwest::Method::GET, path))?)
    }

    fn post<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, ClientError> {
        Self::decode(self.send(self.request(reqwest::Method::POST, path).json(body))?)
    }

    pub fn health(&self) -> Result<serde_json::Value, ClientError> {
        self.get("/health")
    }

    pub fn create_session(
        &self,
        session_id: Option<&str>,
        script_id: &str,
        goal: Option<&str>,
        predictor: PredictorKind,
    ) -> Result<Created, ClientError> {
        let mut body = json!({ "script_id": script_id, "predictor": predictor });
        if let Some(id) = session_id {
            body["session_id"] = json!(id);
        }
        if let Some(g) = goal {
            body["goal"] = json!(g);
        }
        self.post("/sessions", &body)
    }

    pub fn session(&self, id: &str) -> Result<SessionView, ClientError> {
        self.get(&format!("/sessions/{id}"))
    }

    pub fn ingest(
        &self,
        id: &str,
        narrations: &[Narration],
        frames: &[FrameRef],
    ) -> Result<IngestAccepted, ClientError> {
        self.post(
            &format!("/sessions/{id}/ingest"),
            &json!({ "narrations": narrations, "frames": frames }),
        )
    }

    pub fn next_step(&self, id: &str) -> Result<NextStep, ClientError> {
        self.post(&format!("/sessions/{id}/next"), &json!({}))
    }

    pub fn report_outcome(
        &self,
        id: &str,
        index: Option<usize>,
        outcome: SuggestionOutcome,
    ) -> Result<StateSummary, ClientError> {
        self.post(
            &format!("/sessions/{id}/outcome"),
            &json!({ "index": index, "outcome": outcome }),
        )
    }

    /// The raw JSON body of a successful finalize.
    pub fn finalize_raw(
        &self,
        id: &str,
        participant: Option<bool>,
        admin: Option<bool>,
    ) -> Result<Vec<u8>, ClientError> {
        let rb = self
            .request(reqwest::Method::POST, &format!("/sessions/{id}/finalize"))
            .json(&json!({ "participant": participant, "admin": admin }));
        Ok(self.send(rb)?.bytes()?.to_vec())
    }

    pub fn report(&self, id: &str) -> Result<SessionReport, ClientError> {
        self.get(&format!("/sessions/{id}/report"))
    }

    /// Reads the event stream to its end; only terminates for sessions
    /// that are already finalized.
    pub fn events(&self, id: &str, after: Option<u64>) -> Result<Vec<SessionEvent>, ClientError> {
        let path = match after {
            Some(a) => format!("/sessions/{id}/events?after={a}"),
            None => format!("/sessions/{id}/events"),
        };
        let text = self
            .send(self.request(reqwest::Method::GET, &path))?
            .text()?;
        parse_sse(&text)
    }

    pub fn start_bench(&self, kind: &str, req: &BenchRequest) -> Result<JobAccepted, ClientError> {
        self.post(&format!("/bench/{kind}"), req)
    }

    pub fn job(&self, job_id: &str) -> Result<JobView, ClientError> {
        self.get(&format!("/jobs/{job_id}"))
    }

    /// Polls a job until it leaves the running state.
    pub fn wait_job(&self, job_id: &str, timeout: Duration) -> Result<JobView, ClientError> {
        let start = Instant::now();
        loop {
            let job = self.job(job_id)?;
            if job.status != JobStatus::Running {
                return Ok(job);
            }
            if start.elapsed() > timeout {
                return Err(ClientError::Timeout(job_id.to_string()));
            }
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

/// Parses `data:` lines of a server-sent event body into session events.
pub fn parse_sse(text: &str) -> Result<Vec<SessionEvent>, ClientError> {
    text.lines()
        .filter_map(|l| l.strip_prefix("data:"))
        .map(|d| {
            serde_json::from_str(d.trim_start()).map_err(|e| ClientError::Decode(e.to_string()))
        })
        .collect()
}

#[derive(Debug)]
pub struct RemoteSimulation {
    pub report: SessionReport,
    /// The finalize response exactly as received.
    pub raw_report: Vec<u8>,
}

/// Runs the simulated user of the in-process protocol against a server:
/// creates the session, streams the partial-progress narrations, answers
/// every suggestion with the same policy and finalizes.
pub fn simulate_remote(
    client: &ApiClient,
    session_id: &str,
    script: &ActivityScript,
    kind: PredictorKind,
    embedder: &dyn Embedder,
    match_threshold: f64,
) -> Result<RemoteSimulation, ClientError> {
    client.create_session(Some(session_id), &script.script_id, None, kind)?;
    let mut stream_end = client
        .ingest(
            session_id,
            &partial_progress_narrations(script, STEP_SECONDS),
            &[],
        )?
        .stream_end_s;
    let mut mirror = SessionState::new(session_id, script.clone(), None)
        .map_err(|e| ClientError::Simulation(e.to_string()))?;
    let mut failures = 0;
    loop {
        let next = match client.next_step(session_id) {
            Ok(n) => n,
            Err(ClientError::Api { status, body, .. })
                if status == StatusCode::SERVICE_UNAVAILABLE && body.next.is_some() =>
            {
                failures += 1;
                if failures >= MAX_ASSISTANT_ERRORS {
                    return Err(ClientError::AssistantFailed {
                        attempts: failures,
                        message: body.message,
                    });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        failures = 0;
        mirror.suggestions = client.session(session_id)?.records;
        let record = mirror
            .suggestions
            .get(next.suggestion_index)
            .cloned()
            .ok_or_else(|| {
                ClientError::Decode(format!("missing suggestion {}", next.suggestion_index))
            })?;
        let outcome = decide_outcome(&record, &mirror, embedder, match_threshold)
            .map_err(|e| ClientError::Simulation(e.to_string()))?;
        if outcome == SuggestionOutcome::Executed && !record.done {
            if let Some(step) = record.mapped_step.as_deref().and_then(|id| script.step(id)) {
                let n = step_narration(step, stream_end, STEP_SECONDS);
                stream_end = client.ingest(session_id, &[n], &[])?.stream_end_s;
            }
        }
        let summary = client.report_outcome(session_id, Some(next.suggestion_index), outcome)?;
        if summary.end_reason.is_some() {
            break;
        }
    }
    mirror.suggestions = client.session(session_id)?.records;
    let done = mirror.completed_steps();
    let ok = script
        .required_step_ids()
        .iter()
        .all(|id| done.contains(*id));
    let raw_report = client.finalize_raw(session_id, Some(ok), Some(ok))?;
    let report =
        serde_json::from_slice(&raw_report).map_err(|e| ClientError::Decode(e.to_string()))?;
    Ok(RemoteSimulation { report, raw_report })
}
