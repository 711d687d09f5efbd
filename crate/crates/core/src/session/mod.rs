//! The user-in-the-loop assistance protocol.
//!
//! [`state`] holds the pure state machine (phases, skip counter, executed
//! cap, termination), [`engine`] wires it to providers and the event log,
//! [`simulate`] runs it with a mechanical user, and [`analyze`] aggregates
//! finished sessions.

pub mod analyze;
pub mod assistants;
pub mod engine;
pub mod events;
pub mod matching;
pub mod report;
pub mod simulate;
pub mod state;

use thiserror::Error;

pub use analyze::{analyze_skips, SkipTable};
pub use engine::{replay, NextStep, Session, SessionConfig, StateSummary, REPEAT_REQUEST};
pub use events::{EventKind, EventLog, SessionEvent};
pub use matching::{detect_done, match_to_step};
pub use report::{online_miou, SessionReport, SkipCounts};
pub use simulate::{simulate_user, simulate_with, Simulation, StudySession};
pub use state::{EndReason, Phase, Ratings, SessionState};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` already exists")]
    DuplicateSession(String),
    #[error("no goal given and the script has no goal text")]
    MissingGoal,
    #[error("session is completed")]
    SessionCompleted,
    #[error("suggestion {index} is pending; resolve previous outcome first")]
    PendingSuggestion { index: usize },
    #[error("no pending suggestion")]
    NoPendingSuggestion,
    #[error("pending suggestion is {expected}, got {got}")]
    IndexMismatch { expected: usize, got: usize },
    #[error("invalid outcome: {0}")]
    InvalidOutcome(String),
    #[error("session is not completed yet")]
    NotCompleted,
    #[error("session is already finalized")]
    AlreadyFinalized,
    #[error("both participant and admin ratings are required")]
    MissingRating,
    #[error("empty history: ingest frames or narrations first")]
    EmptyHistory,
    #[error("out-of-order timestamp {timestamp_s} s")]
    OutOfOrder { timestamp_s: f64 },
    #[error("invalid ingest: {0}")]
    Ingest(String),
    #[error("history encoding: {0}")]
    History(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("provider: {0}")]
    Provider(String),
    #[error("assistant failed {attempts} times in a row: {message}")]
    AssistantFailed { attempts: usize, message: String },
    #[error("replay diverged at suggestion {index}: expected `{expected}`, got `{got}`")]
    ReplayDivergence {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("event log line {line}: {message}")]
    EventLog { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownSession(_) => "unknown_session",
            Self::DuplicateSession(_) => "duplicate_session",
            Self::MissingGoal => "missing_goal",
            Self::SessionCompleted => "session_completed",
            Self::PendingSuggestion { .. } => "pending_suggestion",
            Self::NoPendingSuggestion => "no_pending_suggestion",
            Self::IndexMismatch { .. } => "index_mismatch",
            Self::InvalidOutcome(_) => "invalid_outcome",
            Self::NotCompleted => "session_not_completed",
            Self::AlreadyFinalized => "already_finalized",
            Self::MissingRating => "missing_rating",
            Self::EmptyHistory => "empty_history",
            Self::OutOfOrder { .. } => "out_of_order",
            Self::Ingest(_) => "invalid_ingest",
            Self::History(_) => "history_error",
            Self::Config(_) => "invalid_config",
            Self::Provider(_) => "provider_unavailable",
            Self::AssistantFailed { .. } => "assistant_failed",
            Self::ReplayDivergence { .. } => "replay_divergence",
            Self::EventLog { .. } => "invalid_event_log",
            Self::Io(_) => "io_error",
        }
    }

    /// Protocol-order violations.
    pub fn is_conflict(&self) -> bool {
        matches!(
            self,
            Self::DuplicateSession(_)
                | Self::SessionCompleted
                | Self::PendingSuggestion { .. }
                | Self::NoPendingSuggestion
                | Self::IndexMismatch { .. }
                | Self::NotCompleted
                | Self::AlreadyFinalized
                | Self::EmptyHistory
        )
    }

    pub fn is_provider(&self) -> bool {
        matches!(self, Self::Provider(_) | Self::AssistantFailed { .. })
    }
}
