//! Session reports and the online mIoU.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::matching::normalize_instruction;
use super::state::{EndReason, Ratings, SessionState};
use super::SessionError;
use crate::metrics::set_iou;
use crate::script::ActivityScript;
use crate::types::{SuggestionOutcome, SuggestionRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub redundant: usize,
    pub infeasible: usize,
    pub irrelevant: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.redundant + self.infeasible + self.irrelevant
    }

    pub fn add(&mut self, outcome: SuggestionOutcome) {
        match outcome {
            SuggestionOutcome::SkippedRedundant => self.redundant += 1,
            SuggestionOutcome::SkippedInfeasible => self.infeasible += 1,
            SuggestionOutcome::SkippedIrrelevant => self.irrelevant += 1,
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &SkipCounts) {
        self.redundant += other.redundant;
        self.infeasible += other.infeasible;
        self.irrelevant += other.irrelevant;
    }

    pub fn from_records(records: &[SuggestionRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            c.add(r.outcome);
        }
        c
    }

    /// Share of skips that were redundant; `None` without skips.
    pub fn redundant_share(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.redundant as f64 / self.total() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    Step(String),
    Text(String),
}

/// Set of actions a list of suggestions stands for: matched step ids, plus
/// one entry per distinct unmatched text. Done and system-error turns are
/// not actions.
fn suggested_items(records: &[SuggestionRecord]) -> BTreeSet<Item> {
    records
        .iter()
        .filter(|r| !r.done && r.outcome != SuggestionOutcome::SystemError)
        .map(|r| match &r.mapped_step {
            Some(id) => Item::Step(id.clone()),
            None => Item::Text(normalize_instruction(&r.raw_text)),
        })
        .collect()
}

/// IoU between predicted step ids (with unmatched texts) and the script's
/// post-boundary non-optional steps.
pub fn step_set_iou(mapped: &[(Option<String>, String)], script: &ActivityScript) -> f64 {
    let pred: BTreeSet<Item> = mapped
        .iter()
        .map(|(id, raw)| match id {
            Some(id) => Item::Step(id.clone()),
            None => Item::Text(normalize_instruction(raw)),
        })
        .collect();
    let gt: BTreeSet<Item> = script
        .eval_step_ids()
        .into_iter()
        .map(|s| Item::Step(s.to_string()))
        .collect();
    set_iou(&pred, &gt).0
}

pub fn online_miou(suggestions: &[SuggestionRecord], script: &ActivityScript) -> f64 {
    let gt: BTreeSet<Item> = script
        .eval_step_ids()
        .into_iter()
        .map(|s| Item::Step(s.to_string()))
        .collect();
    set_iou(&suggested_items(suggestions), &gt).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub script_id: String,
    pub predictor: String,
    pub success: bool,
    pub end_reason: EndReason,
    pub end_detected: bool,
    pub online_miou: f64,
    pub executed_count: usize,
    pub skip_breakdown: SkipCounts,
    pub system_errors: usize,
    pub ratings: Ratings,
    pub suggestions: Vec<SuggestionRecord>,
}

impl SessionReport {
    pub fn from_state(state: &SessionState, predictor: &str) -> Result<Self, SessionError> {
        let end_reason = state.end_reason.ok_or(SessionError::NotCompleted)?;
        let (Some(p), Some(a)) = (state.ratings.participant, state.ratings.admin) else {
            return Err(SessionError::MissingRating);
        };
        Ok(Self {
            session_id: state.session_id.clone(),
            script_id: state.script.script_id.clone(),
            predictor: predictor.to_string(),
            success: p && a,
            end_reason,
            end_detected: end_reason == EndReason::DoneStep,
            online_miou: online_miou(&state.suggestions, &state.script),
            executed_count: state.executed_count,
            skip_breakdown: SkipCounts::from_records(&state.suggestions),
            system_errors: state
                .suggestions
                .iter()
                .filter(|s| s.outcome == SuggestionOutcome::SystemError)
                .count(),
            ratings: state.ratings,
            suggestions: state.suggestions.clone(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}
