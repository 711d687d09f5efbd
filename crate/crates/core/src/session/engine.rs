//! A live session: protocol state plus providers, the raw stream buffer and
//! the event log. History is re-encoded from the full buffer before every
//! prediction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::events::{EventKind, EventLog};
use super::matching::{
    detect_done, match_to_step, DEFAULT_DONE_THRESHOLD, DEFAULT_MATCH_THRESHOLD,
};
use super::report::SessionReport;
use super::simulate::StudySession;
use super::state::{EndReason, Phase, SessionState};
use super::SessionError;
use crate::history::{encode_online_history, HistoryError, StreamConfig};
use crate::pipelines::{Predictor, PredictorConfig, PredictorKind};
use crate::prompting::ExamplePool;
use crate::providers::Providers;
use crate::script::ActivityScript;
use crate::types::{FrameRef, Narration, SuggestionOutcome};

/// Instruction shown to the user when a prediction fails.
pub const REPEAT_REQUEST: &str = "Please repeat the request";

fn default_match() -> f64 {
    DEFAULT_MATCH_THRESHOLD
}
fn default_done() -> f64 {
    DEFAULT_DONE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default = "default_match")]
    pub match_threshold: f64,
    #[serde(default = "default_done")]
    pub done_threshold: f64,
}

impl SessionConfig {
    pub fn new(kind: PredictorKind) -> Self {
        Self {
            predictor: PredictorConfig::online(kind),
            stream: StreamConfig::default(),
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            done_threshold: DEFAULT_DONE_THRESHOLD,
        }
    }

    pub fn kind(&self) -> PredictorKind {
        self.predictor.kind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextStep {
    pub suggestion_index: usize,
    pub instruction: String,
    pub mapped_step: Option<String>,
    pub done: bool,
    pub system_error: bool,
}

/// Compact view of the protocol counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub session_id: String,
    pub script_id: String,
    pub predictor: String,
    pub goal: String,
    pub phase: Phase,
    pub consecutive_skips: usize,
    pub executed_count: usize,
    pub step_cap: usize,
    pub suggestions: usize,
    pub pending_index: Option<usize>,
    pub end_reason: Option<EndReason>,
    pub finalized: bool,
}

pub struct Session {
    state: SessionState,
    config: SessionConfig,
    providers: Providers,
    predictor: Predictor,
    frames: Vec<FrameRef>,
    narrations: Vec<Narration>,
    /// Narrations ingested before the first suggestion.
    partial_progress_len: Option<usize>,
    stream_end_s: f64,
    events: EventLog,
    report: Option<SessionReport>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("session_id", &self.state.session_id)
            .field("phase", &self.state.phase)
            .finish_non_exhaustive()
    }
}

enum Failure {
    System(String),
    Fatal(SessionError),
}

impl Session {
    pub fn start(
        session_id: impl Into<String>,
        script: ActivityScript,
        goal: Option<&str>,
        config: SessionConfig,
        providers: Providers,
        pool: Arc<ExamplePool>,
    ) -> Result<Self, SessionError> {
        let state = SessionState::new(session_id, script, goal)?;
        config
            .stream
            .validate()
            .map_err(|e| SessionError::Config(e.to_string()))?;
        let predictor = Predictor::new(config.predictor.clone(), providers.clone(), pool)
            .map_err(|e| SessionError::Config(e.to_string()))?;
        let mut events = EventLog::default();
        events.push(EventKind::Started {
            session_id: state.session_id.clone(),
            script_id: state.script.script_id.clone(),
            goal: state.goal.clone(),
            predictor: config.kind().label().to_string(),
        });
        Ok(Self {
            state,
            config,
            providers,
            predictor,
            frames: Vec::new(),
            narrations: Vec::new(),
            partial_progress_len: None,
            stream_end_s: 0.0,
            events,
            report: None,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }

    pub fn predictor_label(&self) -> &'static str {
        self.config.kind().label()
    }

    /// Narrations ingested directly, in arrival order.
    pub fn ingested_narrations(&self) -> &[Narration] {
        &self.narrations
    }

    pub fn stream_end_s(&self) -> f64 {
        self.stream_end_s
    }

    pub fn summary(&self) -> StateSummary {
        StateSummary {
            session_id: self.state.session_id.clone(),
            script_id: self.state.script.script_id.clone(),
            predictor: self.predictor_label().to_string(),
            goal: self.state.goal.clone(),
            phase: self.state.phase,
            consecutive_skips: self.state.consecutive_skips,
            executed_count: self.state.executed_count,
            step_cap: self.state.step_cap(),
            suggestions: self.state.suggestions.len(),
            pending_index: self.state.pending().map(|p| p.index),
            end_reason: self.state.end_reason,
            finalized: self.report.is_some(),
        }
    }

    fn check_open(&self) -> Result<(), SessionError> {
        if self.state.is_completed() {
            Err(SessionError::SessionCompleted)
        } else {
            Ok(())
        }
    }

    /// Buffers narrations (simulation mode); no model calls happen here.
    pub fn ingest_narrations(&mut self, narrations: Vec<Narration>) -> Result<(), SessionError> {
        self.check_open()?;
        let mut last = self.narrations.last().map(|n| n.span.start_s());
        for n in &narrations {
            let t = n.span.start_s();
            if last.is_some_and(|l| t < l) {
                return Err(SessionError::OutOfOrder { timestamp_s: t });
            }
            last = Some(t);
        }
        let end = narrations
            .iter()
            .map(|n| n.span.end_s())
            .fold(self.stream_end_s, f64::max);
        self.stream_end_s = end;
        self.narrations.extend(narrations.iter().cloned());
        self.events.push(EventKind::Ingested {
            narrations,
            frames: Vec::new(),
            stream_end_s: end,
        });
        Ok(())
    }

    /// Buffers timestamped frame references; segmentation happens lazily.
    pub fn ingest_frames(&mut self, frames: Vec<FrameRef>) -> Result<(), SessionError> {
        self.check_open()?;
        let mut last = self.frames.last().and_then(|f| f.timestamp_s);
        for f in &frames {
            let t = f.timestamp_s.ok_or_else(|| {
                SessionError::Ingest(format!("frame `{}` has no timestamp", f.id))
            })?;
            if last.is_some_and(|l| t < l) {
                return Err(SessionError::OutOfOrder { timestamp_s: t });
            }
            last = Some(t);
        }
        let step = 1.0 / self.config.stream.fps as f64;
        let end = frames
            .iter()
            .filter_map(|f| f.timestamp_s)
            .map(|t| t + step)
            .fold(self.stream_end_s, f64::max);
        self.stream_end_s = end;
        self.frames.extend(frames.iter().cloned());
        self.events.push(EventKind::Ingested {
            narrations: Vec::new(),
            frames,
            stream_end_s: end,
        });
        Ok(())
    }

    fn predict(&mut self, index: usize) -> Result<(String, bool, Option<String>), Failure> {
        let encoded = encode_online_history(
            &self.frames,
            &self.narrations,
            &self.state.goal,
            &self.config.stream,
            &self.providers,
            self.config.kind() == PredictorKind::Vclm,
        )
        .map_err(|e| match e {
            HistoryError::EmptyHistory => Failure::Fatal(SessionError::EmptyHistory),
            HistoryError::OutOfOrder { timestamp_s } => {
                Failure::Fatal(SessionError::OutOfOrder { timestamp_s })
            }
            e if e.is_provider() => Failure::System(e.to_string()),
            e => Failure::Fatal(SessionError::History(e.to_string())),
        })?;
        self.events.push(EventKind::HistoryEncoded {
            raw_narrations: encoded.raw_narrations,
            clusters: encoded.clusters,
            summary_fallback: encoded.summary_fallback,
            summarized: encoded.history.narration_texts(),
        });
        self.state.history = encoded.history;
        let (instruction, prediction) = self
            .predictor
            .predict_next_detailed(&self.state.history)
            .map_err(|e| Failure::System(e.to_string()))?;
        self.events.push(EventKind::Prompt {
            index,
            text: prediction.prompt.text,
        });
        let embedder = self.providers.embedder.as_ref();
        let done = detect_done(&instruction, embedder, self.config.done_threshold)
            .map_err(|e| Failure::System(e.to_string()))?;
        let mapped = if done {
            None
        } else {
            match_to_step(
                &instruction,
                &self.state.script,
                embedder,
                self.config.match_threshold,
            )
            .map_err(|e| Failure::System(e.to_string()))?
            .map(|m| m.step_id)
        };
        Ok((instruction, done, mapped))
    }

    /// Re-encodes the history, predicts one open-set instruction and records
    /// it as pending. Prediction failures become a system-error turn asking
    /// the user to repeat the request.
    pub fn next_step(&mut self) -> Result<NextStep, SessionError> {
        self.state.ready_for_suggestion()?;
        self.partial_progress_len
            .get_or_insert(self.narrations.len());
        let index = self.state.suggestions.len();
        let t = self.stream_end_s;
        match self.predict(index) {
            Ok((instruction, done, mapped)) => {
                self.state
                    .issue(instruction.clone(), mapped.clone(), done, t)?;
                self.events.push(EventKind::Suggested {
                    record: self.state.suggestions[index].clone(),
                });
                Ok(NextStep {
                    suggestion_index: index,
                    instruction,
                    mapped_step: mapped,
                    done,
                    system_error: false,
                })
            }
            Err(Failure::System(message)) => {
                tracing::warn!(session = %self.state.session_id, %message, "prediction failed");
                self.state.system_error(REPEAT_REQUEST, t)?;
                self.events.push(EventKind::SystemError { index, message });
                self.events.push(EventKind::Suggested {
                    record: self.state.suggestions[index].clone(),
                });
                Ok(NextStep {
                    suggestion_index: index,
                    instruction: REPEAT_REQUEST.to_string(),
                    mapped_step: None,
                    done: false,
                    system_error: true,
                })
            }
            Err(Failure::Fatal(e)) => Err(e),
        }
    }

    pub fn report_outcome(
        &mut self,
        index: Option<usize>,
        outcome: SuggestionOutcome,
    ) -> Result<Option<EndReason>, SessionError> {
        let resolved = self.state.pending().map(|p| p.index);
        let end = self.state.report_outcome(index, outcome)?;
        self.events.push(EventKind::Outcome {
            index: resolved.expect("outcome accepted only with a pending suggestion"),
            outcome,
            phase: self.state.phase,
        });
        if let Some(end_reason) = end {
            self.events.push(EventKind::Terminated { end_reason });
        }
        Ok(end)
    }

    pub fn finalize(
        &mut self,
        participant: Option<bool>,
        admin: Option<bool>,
    ) -> Result<SessionReport, SessionError> {
        if self.report.is_some() {
            return Err(SessionError::AlreadyFinalized);
        }
        let ratings = self.state.set_ratings(participant, admin)?;
        self.events.push(EventKind::Rated {
            participant: ratings.participant.expect("set"),
            admin: ratings.admin.expect("set"),
        });
        let report = SessionReport::from_state(&self.state, self.predictor_label())?;
        self.report = Some(report.clone());
        Ok(report)
    }

    pub fn report(&self) -> Option<&SessionReport> {
        self.report.as_ref()
    }

    /// Goal, partial-progress narrations and report of a finalised session.
    pub fn study_session(&self) -> Option<StudySession> {
        let report = self.report.clone()?;
        let n = self.partial_progress_len.unwrap_or(self.narrations.len());
        Some(StudySession {
            goal: self.state.goal.clone(),
            partial_progress: self.narrations[..n].to_vec(),
            report,
        })
    }
}

/// Re-runs a logged session against `providers` and checks that every
/// suggestion comes out identical. Returns the replayed session, whose event
/// log can be compared with the original.
pub fn replay(
    log: &EventLog,
    script: &ActivityScript,
    config: SessionConfig,
    providers: Providers,
    pool: Arc<ExamplePool>,
) -> Result<Session, SessionError> {
    let mut session: Option<Session> = None;
    for ev in log.events() {
        match &ev.kind {
            EventKind::Started {
                session_id, goal, ..
            } => {
                session = Some(Session::start(
                    session_id.clone(),
                    script.clone(),
                    Some(goal),
                    config.clone(),
                    providers.clone(),
                    pool.clone(),
                )?);
            }
            kind => {
                let s = session.as_mut().ok_or_else(|| SessionError::EventLog {
                    line: ev.seq as usize,
                    message: "event before session start".into(),
                })?;
                match kind {
                    EventKind::Ingested {
                        narrations, frames, ..
                    } => {
                        if !narrations.is_empty() {
                            s.ingest_narrations(narrations.clone())?;
                        }
                        if !frames.is_empty() {
                            s.ingest_frames(frames.clone())?;
                        }
                    }
                    EventKind::Suggested { record } => {
                        let next = s.next_step()?;
                        let expected_error = record.outcome == SuggestionOutcome::SystemError;
                        if next.instruction != record.raw_text
                            || next.system_error != expected_error
                        {
                            return Err(SessionError::ReplayDivergence {
                                index: record.index,
                                expected: record.raw_text.clone(),
                                got: next.instruction,
                            });
                        }
                    }
                    EventKind::Outcome { index, outcome, .. } => {
                        s.report_outcome(Some(*index), *outcome)?;
                    }
                    EventKind::Rated { participant, admin } => {
                        s.finalize(Some(*participant), Some(*admin))?;
                    }
                    _ => {}
                }
            }
        }
    }
    session.ok_or_else(|| SessionError::EventLog {
        line: 0,
        message: "log has no start event".into(),
    })
}
