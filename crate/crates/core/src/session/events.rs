//! Append-only session event log.
//!
//! Every event carries a sequence number starting at 1. The log records
//! ingested data, encoded-history audits, prompts, suggestions, outcomes,
//! terminations and ratings, which is enough to replay a session under
//! deterministic providers.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::{EndReason, Phase};
use super::SessionError;
use crate::types::{FrameRef, Narration, SuggestionOutcome, SuggestionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Started {
        session_id: String,
        script_id: String,
        goal: String,
        predictor: String,
    },
    Ingested {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        narrations: Vec<Narration>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        frames: Vec<FrameRef>,
        stream_end_s: f64,
    },
    HistoryEncoded {
        raw_narrations: usize,
        clusters: usize,
        summary_fallback: bool,
        summarized: Vec<String>,
    },
    Prompt {
        index: usize,
        text: String,
    },
    Suggested {
        record: SuggestionRecord,
    },
    SystemError {
        index: usize,
        message: String,
    },
    Outcome {
        index: usize,
        outcome: SuggestionOutcome,
        phase: Phase,
    },
    Terminated {
        end_reason: EndReason,
    },
    Rated {
        participant: bool,
        admin: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl SessionEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serialises")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<SessionEvent>,
}

impl EventLog {
    pub fn push(&mut self, kind: EventKind) -> &SessionEvent {
        let seq = self.events.len() as u64 + 1;
        self.events.push(SessionEvent { seq, kind });
        self.events.last().expect("just pushed")
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// Events with `seq > after`.
    pub fn since(&self, after: u64) -> &[SessionEvent] {
        let start = (after as usize).min(self.events.len());
        &self.events[start..]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), SessionError> {
        let mut f = std::fs::File::create(path).map_err(|e| SessionError::Io(e.to_string()))?;
        f.write_all(self.render().as_bytes())
            .map_err(|e| SessionError::Io(e.to_string()))
    }

    pub fn parse(reader: impl BufRead) -> Result<Self, SessionError> {
        let mut log = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| SessionError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: SessionEvent =
                serde_json::from_str(&line).map_err(|e| SessionError::EventLog {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if ev.seq != log.events.len() as u64 + 1 {
                return Err(SessionError::EventLog {
                    line: i + 1,
                    message: format!("sequence {} out of order", ev.seq),
                });
            }
            log.events.push(ev);
        }
        Ok(log)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let f = std::fs::File::open(path).map_err(|e| SessionError::Io(e.to_string()))?;
        Self::parse(BufReader::new(f))
    }
}
