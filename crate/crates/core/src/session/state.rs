//! The protocol state machine. Everything here is pure: no providers, no
//! clocks, so it can be driven by property tests and replays alike.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::script::ActivityScript;
use crate::types::{SuggestionOutcome, SuggestionRecord, VisualHistory};

/// Consecutive skips that end a session.
pub const SKIP_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PartialProgress,
    Assisting,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    DoneStep,
    ThreeSkips,
    StepCap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratings {
    pub participant: Option<bool>,
    pub admin: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub phase: Phase,
    pub script: ActivityScript,
    pub goal: String,
    pub history: VisualHistory,
    pub suggestions: Vec<SuggestionRecord>,
    pub consecutive_skips: usize,
    pub executed_count: usize,
    pub end_reason: Option<EndReason>,
    pub ratings: Ratings,
}

impl SessionState {
    /// A blank goal falls back to the script's goal text.
    pub fn new(
        session_id: impl Into<String>,
        script: ActivityScript,
        goal: Option<&str>,
    ) -> Result<Self, SessionError> {
        let goal = match goal.map(str::trim) {
            Some(g) if !g.is_empty() => g.to_string(),
            _ if !script.goal_text.trim().is_empty() => script.goal_text.trim().to_string(),
            _ => return Err(SessionError::MissingGoal),
        };
        Ok(Self {
            session_id: session_id.into(),
            phase: Phase::PartialProgress,
            history: VisualHistory::default().with_goal(goal.clone()),
            script,
            goal,
            suggestions: Vec::new(),
            consecutive_skips: 0,
            executed_count: 0,
            end_reason: None,
            ratings: Ratings::default(),
        })
    }

    pub fn step_cap(&self) -> usize {
        self.script.step_cap()
    }

    pub fn pending(&self) -> Option<&SuggestionRecord> {
        self.suggestions
            .last()
            .filter(|s| s.outcome == SuggestionOutcome::Pending)
    }

    pub fn is_completed(&self) -> bool {
        self.phase == Phase::Completed
    }

    /// Errors unless a new suggestion may be issued.
    pub fn ready_for_suggestion(&self) -> Result<(), SessionError> {
        if self.is_completed() {
            return Err(SessionError::SessionCompleted);
        }
        if let Some(p) = self.pending() {
            return Err(SessionError::PendingSuggestion { index: p.index });
        }
        Ok(())
    }

    fn push(&mut self, record: SuggestionRecord) -> usize {
        if self.phase == Phase::PartialProgress {
            self.phase = Phase::Assisting;
        }
        let index = record.index;
        self.suggestions.push(record);
        index
    }

    /// Appends a pending suggestion and returns its index.
    pub fn issue(
        &mut self,
        raw_text: impl Into<String>,
        mapped_step: Option<String>,
        done: bool,
        timestamp: f64,
    ) -> Result<usize, SessionError> {
        self.ready_for_suggestion()?;
        let index = self.suggestions.len();
        Ok(self.push(SuggestionRecord {
            index,
            raw_text: raw_text.into(),
            mapped_step,
            outcome: SuggestionOutcome::Pending,
            timestamp,
            done,
        }))
    }

    /// Records a provider-failure turn. It is terminal on arrival and does
    /// not touch the skip counter.
    pub fn system_error(
        &mut self,
        raw_text: impl Into<String>,
        timestamp: f64,
    ) -> Result<usize, SessionError> {
        self.ready_for_suggestion()?;
        let index = self.suggestions.len();
        Ok(self.push(SuggestionRecord {
            index,
            raw_text: raw_text.into(),
            mapped_step: None,
            outcome: SuggestionOutcome::SystemError,
            timestamp,
            done: false,
        }))
    }

    /// Resolves the pending suggestion and applies the termination rules in
    /// order: done step, three consecutive skips, executed cap. `index`, when
    /// given, must name the pending suggestion.
    pub fn report_outcome(
        &mut self,
        index: Option<usize>,
        outcome: SuggestionOutcome,
    ) -> Result<Option<EndReason>, SessionError> {
        if !(outcome == SuggestionOutcome::Executed || outcome.is_skip()) {
            return Err(SessionError::InvalidOutcome(format!(
                "{outcome:?} cannot be reported; use executed or a skip reason"
            )));
        }
        if self.is_completed() {
            return Err(SessionError::SessionCompleted);
        }
        let pending = self.pending().map(|p| p.index);
        match (pending, index) {
            (None, _) => return Err(SessionError::NoPendingSuggestion),
            (Some(p), Some(i)) if i < p => return Err(SessionError::NoPendingSuggestion),
            (Some(p), Some(i)) if i != p => {
                return Err(SessionError::IndexMismatch {
                    expected: p,
                    got: i,
                })
            }
            _ => {}
        }
        let record = self.suggestions.last_mut().expect("pending exists");
        record
            .resolve(outcome)
            .map_err(|e| SessionError::InvalidOutcome(e.to_string()))?;
        let done = record.done;
        if outcome == SuggestionOutcome::Executed {
            self.executed_count += 1;
            self.consecutive_skips = 0;
        } else {
            self.consecutive_skips += 1;
        }
        let end = if done {
            Some(EndReason::DoneStep)
        } else if self.consecutive_skips >= SKIP_LIMIT {
            Some(EndReason::ThreeSkips)
        } else if self.executed_count >= self.step_cap() {
            Some(EndReason::StepCap)
        } else {
            None
        };
        if let Some(r) = end {
            self.phase = Phase::Completed;
            self.end_reason = Some(r);
        }
        Ok(end)
    }

    pub fn set_ratings(
        &mut self,
        participant: Option<bool>,
        admin: Option<bool>,
    ) -> Result<Ratings, SessionError> {
        if !self.is_completed() {
            return Err(SessionError::NotCompleted);
        }
        let (Some(p), Some(a)) = (participant, admin) else {
            return Err(SessionError::MissingRating);
        };
        self.ratings = Ratings {
            participant: Some(p),
            admin: Some(a),
        };
        Ok(self.ratings)
    }

    /// Steps reported executed plus the partial-progress steps.
    pub fn completed_steps(&self) -> HashSet<String> {
        let mut done: HashSet<String> = self
            .script
            .partial_progress_steps()
            .iter()
            .map(|s| s.step_id.clone())
            .collect();
        for s in &self.suggestions {
            if s.outcome == SuggestionOutcome::Executed {
                if let Some(id) = &s.mapped_step {
                    done.insert(id.clone());
                }
            }
        }
        done
    }

    /// Upper bound on non-system suggestions before termination.
    pub fn suggestion_bound(&self) -> usize {
        (SKIP_LIMIT + 1) * self.step_cap()
    }

    /// Checks every protocol invariant; used by tests and replays.
    pub fn check_invariants(&self) -> Result<(), String> {
        let pending = self
            .suggestions
            .iter()
            .filter(|s| s.outcome == SuggestionOutcome::Pending)
            .count();
        if pending > 1 {
            return Err(format!("{pending} pending suggestions"));
        }
        if pending == 1 && self.pending().is_none() {
            return Err("pending suggestion is not the latest".into());
        }
        if self
            .suggestions
            .iter()
            .enumerate()
            .any(|(i, s)| s.index != i)
        {
            return Err("suggestion indices are not 0..n".into());
        }
        if self.executed_count > self.step_cap() {
            return Err(format!(
                "executed {} exceeds cap {}",
                self.executed_count,
                self.step_cap()
            ));
        }
        if self.consecutive_skips > SKIP_LIMIT {
            return Err(format!("{} consecutive skips", self.consecutive_skips));
        }
        let executed = self
            .suggestions
            .iter()
            .filter(|s| s.outcome == SuggestionOutcome::Executed)
            .count();
        if executed != self.executed_count {
            return Err("executed count disagrees with the log".into());
        }
        let trailing = self
            .suggestions
            .iter()
            .rev()
            .filter(|s| s.outcome.is_terminal() && s.outcome != SuggestionOutcome::SystemError)
            .take_while(|s| s.outcome.is_skip())
            .count();
        if trailing != self.consecutive_skips {
            return Err("consecutive skip counter disagrees with the log".into());
        }
        if self.is_completed() != self.end_reason.is_some() {
            return Err("phase and end reason disagree".into());
        }
        if self.is_completed() && pending > 0 {
            return Err("completed session with a pending suggestion".into());
        }
        let counted = self
            .suggestions
            .iter()
            .filter(|s| s.outcome != SuggestionOutcome::SystemError)
            .count();
        if counted > self.suggestion_bound() {
            return Err(format!(
                "{counted} suggestions exceed bound {}",
                self.suggestion_bound()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::bundled_script;
    use SuggestionOutcome::*;

    fn state(id: &str) -> SessionState {
        SessionState::new("s", bundled_script(id).unwrap(), None).unwrap()
    }

    fn step(s: &mut SessionState, outcome: SuggestionOutcome) -> Option<EndReason> {
        s.issue("x", None, false, 0.0).unwrap();
        s.report_outcome(None, outcome).unwrap()
    }

    #[test]
    fn goal_defaults_to_script() {
        let s = state("latte");
        assert_eq!(s.goal, "make an espresso latte");
        assert_eq!(s.step_cap(), 4);
        assert_eq!(s.phase, Phase::PartialProgress);
    }

    #[test]
    fn three_skips_end_the_session() {
        let mut s = state("caprese");
        assert_eq!(step(&mut s, SkippedRedundant), None);
        assert_eq!(step(&mut s, SkippedIrrelevant), None);
        assert_eq!(step(&mut s, SkippedInfeasible), Some(EndReason::ThreeSkips));
        assert!(s.is_completed());
        assert!(matches!(
            s.issue("y", None, false, 0.0),
            Err(SessionError::SessionCompleted)
        ));
    }

    #[test]
    fn executed_cap() {
        let mut s = state("latte");
        for _ in 0..3 {
            assert_eq!(step(&mut s, Executed), None);
        }
        assert_eq!(step(&mut s, Executed), Some(EndReason::StepCap));
        assert_eq!(s.executed_count, 4);
    }

    #[test]
    fn execute_resets_skips() {
        let mut s = state("blt");
        step(&mut s, SkippedRedundant);
        step(&mut s, Executed);
        step(&mut s, SkippedRedundant);
        assert_eq!(s.consecutive_skips, 1);
        assert!(s.check_invariants().is_ok());
    }

    #[test]
    fn done_suggestion_ends_on_any_outcome() {
        let mut s = state("blt");
        s.issue("Serve the dish", None, true, 0.0).unwrap();
        assert_eq!(
            s.report_outcome(Some(0), SkippedIrrelevant).unwrap(),
            Some(EndReason::DoneStep)
        );
    }

    #[test]
    fn serialisation_rules() {
        let mut s = state("blt");
        assert!(matches!(
            s.report_outcome(None, Executed),
            Err(SessionError::NoPendingSuggestion)
        ));
        s.issue("a", None, false, 0.0).unwrap();
        assert!(matches!(
            s.issue("b", None, false, 0.0),
            Err(SessionError::PendingSuggestion { index: 0 })
        ));
        assert!(matches!(
            s.report_outcome(Some(4), Executed),
            Err(SessionError::IndexMismatch {
                expected: 0,
                got: 4
            })
        ));
        assert!(matches!(
            s.report_outcome(Some(0), Pending),
            Err(SessionError::InvalidOutcome(_))
        ));
        s.report_outcome(Some(0), Executed).unwrap();
        assert!(matches!(
            s.report_outcome(Some(0), Executed),
            Err(SessionError::NoPendingSuggestion)
        ));
        s.system_error("Please repeat the request", 0.0).unwrap();
        assert_eq!(s.consecutive_skips, 0);
        assert!(s.check_invariants().is_ok());
    }

    #[test]
    fn ratings_require_completion_and_both_values() {
        let mut s = state("latte");
        assert!(matches!(
            s.set_ratings(Some(true), Some(true)),
            Err(SessionError::NotCompleted)
        ));
        for _ in 0..3 {
            step(&mut s, SkippedIrrelevant);
        }
        assert!(matches!(
            s.set_ratings(Some(true), None),
            Err(SessionError::MissingRating)
        ));
        assert!(s.set_ratings(Some(true), Some(false)).is_ok());
    }
}
