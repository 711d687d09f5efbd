//! Mechanical execution of the study protocol with a simulated user.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::assistants::{assistant_models, AssistantSpec};
use super::engine::{Session, SessionConfig};
use super::events::{EventKind, EventLog};
use super::matching::matches_out_of_variant;
use super::report::SessionReport;
use super::state::SessionState;
use super::SessionError;
use crate::pipelines::PredictorKind;
use crate::prompting::ExamplePool;
use crate::providers::stub::StubVisionEncoder;
use crate::providers::{Embedder, ProviderError, Providers};
use crate::script::{ActivityScript, ScriptStep};
use crate::types::{Narration, NarrationSource, Span, SuggestionOutcome, SuggestionRecord};

/// Simulated duration of one executed step.
pub const STEP_SECONDS: f64 = 5.0;
/// Consecutive assistant failures before a simulation is aborted.
pub const MAX_ASSISTANT_ERRORS: usize = 3;

/// `"A person <description>"` spanning `[start, start + seconds]`.
pub fn step_narration(step: &ScriptStep, start: f64, seconds: f64) -> Narration {
    let d = step.description.trim();
    let mut chars = d.chars();
    let lowered = match chars.next() {
        Some(c) => format!("{}{}", c.to_lowercase(), chars.as_str()),
        None => String::new(),
    };
    Narration::new(
        format!("A person {lowered}"),
        Span::new(start, start + seconds).expect("positive duration"),
        NarrationSource::GroundTruth,
    )
    .expect("script steps have descriptions")
}

/// One narration per partial-progress step, back to back from t = 0.
pub fn partial_progress_narrations(script: &ActivityScript, seconds: f64) -> Vec<Narration> {
    script
        .partial_progress_steps()
        .iter()
        .enumerate()
        .map(|(i, s)| step_narration(s, i as f64 * seconds, seconds))
        .collect()
}

/// The simulated user's decision for a suggestion:
///
/// - done suggestion: executed when every required step is done, otherwise
///   infeasible;
/// - matched step already done: redundant;
/// - matched step whose predecessors are not all done: infeasible;
/// - matched step otherwise: executed;
/// - unmatched but naming an out-of-variant action: infeasible;
/// - unmatched: irrelevant.
pub fn decide_outcome(
    record: &SuggestionRecord,
    state: &SessionState,
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<SuggestionOutcome, ProviderError> {
    let done = state.completed_steps();
    let script = &state.script;
    if record.done {
        let all = script
            .required_step_ids()
            .iter()
            .all(|id| done.contains(*id));
        return Ok(if all {
            SuggestionOutcome::Executed
        } else {
            SuggestionOutcome::SkippedInfeasible
        });
    }
    Ok(match &record.mapped_step {
        Some(id) if done.contains(id) => SuggestionOutcome::SkippedRedundant,
        Some(id) if !script.precedence_satisfied(id, &done) => SuggestionOutcome::SkippedInfeasible,
        Some(_) => SuggestionOutcome::Executed,
        None if matches_out_of_variant(&record.raw_text, script, embedder, threshold)? => {
            SuggestionOutcome::SkippedInfeasible
        }
        None => SuggestionOutcome::SkippedIrrelevant,
    })
}

/// Drives a started session to completion and finalises it with both
/// ratings set to "every required step was executed".
pub fn run_simulated_user(session: &mut Session) -> Result<SessionReport, SessionError> {
    let threshold = session.config().match_threshold;
    let mut failures = 0;
    while !session.state().is_completed() {
        let next = session.next_step()?;
        if next.system_error {
            failures += 1;
            if failures >= MAX_ASSISTANT_ERRORS {
                let message = session
                    .events()
                    .events()
                    .iter()
                    .rev()
                    .find_map(|e| match &e.kind {
                        EventKind::SystemError { message, .. } => Some(message.clone()),
                        _ => None,
                    })
                    .unwrap_or_default();
                return Err(SessionError::AssistantFailed {
                    attempts: failures,
                    message,
                });
            }
            continue;
        }
        failures = 0;
        let record = session.state().suggestions[next.suggestion_index].clone();
        let outcome = decide_outcome(
            &record,
            session.state(),
            session.providers().embedder.as_ref(),
            threshold,
        )
        .map_err(|e| SessionError::Provider(e.to_string()))?;
        if outcome == SuggestionOutcome::Executed && !record.done {
            if let Some(step) = record
                .mapped_step
                .as_deref()
                .and_then(|id| session.state().script.step(id))
            {
                let n = step_narration(step, session.stream_end_s(), STEP_SECONDS);
                session.ingest_narrations(vec![n])?;
            }
        }
        session.report_outcome(Some(next.suggestion_index), outcome)?;
    }
    let done = session.state().completed_steps();
    let ok = session
        .state()
        .script
        .required_step_ids()
        .iter()
        .all(|id| done.contains(*id));
    session.finalize(Some(ok), Some(ok))
}

/// What an offline rerun needs from a study session, plus its online report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySession {
    pub goal: String,
    pub partial_progress: Vec<Narration>,
    pub report: SessionReport,
}

#[derive(Debug)]
pub struct Simulation {
    pub report: SessionReport,
    pub study: StudySession,
    pub events: EventLog,
}

/// Providers for a simulated session: the assistant's planner, an echo
/// summariser, the given embedder and, for VCLM, the stub vision encoder.
pub fn simulation_providers(
    assistant: &AssistantSpec,
    script: &ActivityScript,
    kind: PredictorKind,
    embedder: Arc<dyn Embedder>,
) -> Result<Providers, ProviderError> {
    let (llm, summarizer) = assistant_models(assistant, script, embedder.clone())?;
    let mut p = Providers::new(llm, embedder)
        .with_summary_llm(summarizer.clone())
        .with_goal_llm(summarizer);
    if kind == PredictorKind::Vclm {
        p = p.with_vision(Arc::new(StubVisionEncoder::default()));
    }
    Ok(p)
}

/// Starts a session, replays the partial-progress phase as narrations and
/// runs the simulated user to the end.
pub fn simulate_user(
    session_id: &str,
    script: &ActivityScript,
    config: SessionConfig,
    providers: Providers,
) -> Result<Simulation, SessionError> {
    let mut session = Session::start(
        session_id,
        script.clone(),
        None,
        config,
        providers,
        Arc::new(ExamplePool::empty()),
    )?;
    let partial = partial_progress_narrations(script, STEP_SECONDS);
    session.ingest_narrations(partial)?;
    let report = run_simulated_user(&mut session)?;
    Ok(Simulation {
        study: session.study_session().expect("finalised"),
        report,
        events: session.events().clone(),
    })
}

/// Convenience wrapper: builds providers for `assistant` and simulates.
pub fn simulate_with(
    session_id: &str,
    script: &ActivityScript,
    assistant: &AssistantSpec,
    kind: PredictorKind,
    embedder: Arc<dyn Embedder>,
) -> Result<Simulation, SessionError> {
    let providers = simulation_providers(assistant, script, kind, embedder)
        .map_err(|e| SessionError::Provider(e.to_string()))?;
    simulate_user(session_id, script, SessionConfig::new(kind), providers)
}
