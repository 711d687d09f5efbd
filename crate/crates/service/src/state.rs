//! Shared service state: one actor per session and the benchmark job table.
//!
//! Mutations of a session queue on a fair async mutex and then run on the
//! blocking pool, so they are applied in arrival order while other sessions
//! proceed. After each mutation the session publishes a snapshot; reads
//! and event streams only ever touch snapshots.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use egoassist_core::config::{BuildContext, RunConfig};
use egoassist_core::jobs::{configured_scripts, BenchKind, JobError};
use egoassist_core::metrics::MetricReport;
use egoassist_core::prompting::ExamplePool;
use egoassist_core::session::{Session, SessionEvent, SessionReport, StateSummary};
use egoassist_core::types::SuggestionRecord;
use egoassist_core::ActivityScript;
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex};

use crate::error::ApiError;

/// What `GET /sessions/{id}` returns: enough to redraw a client screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub summary: StateSummary,
    pub stream_end_s: f64,
    pub records: Vec<SuggestionRecord>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub view: SessionView,
    pub report: Option<SessionReport>,
    pub events: Vec<SessionEvent>,
}

impl Snapshot {
    fn of(session: &Session) -> Self {
        Self {
            view: view(session),
            report: session.report().cloned(),
            events: session.events().events().to_vec(),
        }
    }
}

fn view(session: &Session) -> SessionView {
    SessionView {
        summary: session.summary(),
        stream_end_s: session.stream_end_s(),
        records: session.state().suggestions.clone(),
    }
}

pub struct SessionSlot {
    actor: Arc<Mutex<Session>>,
    snapshot: RwLock<Snapshot>,
    /// Number of events published so far.
    published: watch::Sender<usize>,
}

impl SessionSlot {
    fn new(session: Session) -> Self {
        let snap = Snapshot::of(&session);
        let (published, _) = watch::channel(snap.events.len());
        Self {
            actor: Arc::new(Mutex::new(session)),
            snapshot: RwLock::new(snap),
            published,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.published.subscribe()
    }

    /// Events with `seq > after`, and whether the log is final.
    pub fn events_after(&self, after: u64) -> (Vec<SessionEvent>, bool) {
        let snap = self.snapshot.read().expect("snapshot lock");
        let start = (after as usize).min(snap.events.len());
        (snap.events[start..].to_vec(), snap.report.is_some())
    }

    fn publish(&self, session: &Session) {
        let mut snap = self.snapshot.write().expect("snapshot lock");
        let known = snap.events.len();
        snap.events
            .extend_from_slice(&session.events().events()[known..]);
        snap.view = view(session);
        snap.report = session.report().cloned();
        let n = snap.events.len();
        drop(snap);
        self.published.send_replace(n);
    }

    /// Runs `f` on the session in arrival order and publishes the result.
    pub async fn mutate<T, F>(self: &Arc<Self>, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> T + Send + 'static,
    {
        let guard = self.actor.clone().lock_owned().await;
        let slot = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut session = guard;
            let out = f(&mut session);
            slot.publish(&session);
            out
        })
        .await
        .map_err(|e| ApiError::internal(format!("session task failed: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded {
        report: MetricReport,
        table: String,
    },
    Failed {
        code: String,
        message: String,
        provider: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub kind: BenchKind,
    #[serde(flatten)]
    pub status: JobStatus,
}

struct Inner {
    config: RunConfig,
    scripts: BTreeMap<String, ActivityScript>,
    pool: Arc<ExamplePool>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    jobs: RwLock<HashMap<String, JobView>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: RunConfig) -> Result<Self, JobError> {
        let scripts: BTreeMap<String, ActivityScript> = configured_scripts(&config)?
            .into_iter()
            .map(|s| (s.script_id.clone(), s))
            .collect();
        let pool = match &config.examples {
            Some(path) => {
                let providers = config.providers.build(&BuildContext {
                    script: scripts.values().next(),
                    ..BuildContext::default()
                })?;
                Arc::new(ExamplePool::load(path, providers.embedder.as_ref())?)
            }
            None => Arc::new(ExamplePool::empty()),
        };
        Ok(Self(Arc::new(Inner {
            config,
            scripts,
            pool,
            sessions: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            next_job: AtomicU64::new(1),
        })))
    }

    pub fn config(&self) -> &RunConfig {
        &self.0.config
    }

    pub fn retry_after_s(&self) -> u64 {
        self.0.config.service.retry_after_s
    }

    pub fn scripts(&self) -> &BTreeMap<String, ActivityScript> {
        &self.0.scripts
    }

    pub fn pool(&self) -> Arc<ExamplePool> {
        self.0.pool.clone()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.0.config.service.run_dir.clone()
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.0
            .sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| {
                ApiError::not_found("unknown_session", format!("unknown session `{id}`"))
            })
    }

    /// A fresh `session-NNNN` id.
    pub fn generate_session_id(&self) -> String {
        let sessions = self.0.sessions.read().expect("sessions lock");
        loop {
            let n = self.0.next_session.fetch_add(1, Ordering::Relaxed);
            let id = format!("session-{n:04}");
            if !sessions.contains_key(&id) {
                return id;
            }
        }
    }

    /// Registers a started session; fails if the id is taken.
    pub fn insert_session(&self, session: Session) -> Result<Arc<SessionSlot>, ApiError> {
        let id = session.state().session_id.clone();
        let mut sessions = self.0.sessions.write().expect("sessions lock");
        if sessions.contains_key(&id) {
            return Err(ApiError::conflict(
                "duplicate_session",
                format!("session `{id}` already exists"),
            ));
        }
        let slot = Arc::new(SessionSlot::new(session));
        sessions.insert(id, slot.clone());
        Ok(slot)
    }

    pub fn new_job(&self, kind: BenchKind) -> String {
        let n = self.0.next_job.fetch_add(1, Ordering::Relaxed);
        let job_id = format!("job-{n:04}");
        self.0.jobs.write().expect("jobs lock").insert(
            job_id.clone(),
            JobView {
                job_id: job_id.clone(),
                kind,
                status: JobStatus::Running,
            },
        );
        job_id
    }

    pub fn finish_job(&self, job_id: &str, status: JobStatus) {
        if let Some(j) = self.0.jobs.write().expect("jobs lock").get_mut(job_id) {
            j.status = status;
        }
    }

    pub fn job(&self, job_id: &str) -> Option<JobView> {
        self.0.jobs.read().expect("jobs lock").get(job_id).cloned()
    }
}
