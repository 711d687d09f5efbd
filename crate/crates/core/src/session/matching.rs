//! Matching free-form instructions to script steps and recognising "done"
//! suggestions.

use crate::providers::{Embedder, ProviderError};
use crate::script::ActivityScript;
use crate::text::{strip_actor, words};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.7;
pub const DEFAULT_DONE_THRESHOLD: f64 = 0.8;

/// Phrases that signal the activity is finished.
pub const DONE_PHRASES: [&str; 6] = [
    "serve the dish",
    "the task is complete",
    "the activity is complete",
    "enjoy your meal",
    "enjoy your drink",
    "enjoy your dish",
];

/// Explicit completion marker a planner may emit.
pub const DONE_MARKER: &str = "DONE";

#[derive(Debug, Clone, PartialEq)]
pub struct StepMatch {
    pub step_id: String,
    pub cosine: f64,
}

fn best_match<'a>(
    text: &str,
    candidates: impl IntoIterator<Item = (&'a str, &'a str)>,
    embedder: &dyn Embedder,
) -> Result<Option<StepMatch>, ProviderError> {
    let candidates: Vec<(&str, &str)> = candidates.into_iter().collect();
    let query = strip_actor(text).trim();
    if candidates.is_empty() || query.is_empty() {
        return Ok(None);
    }
    let mut texts = vec![query.to_string()];
    texts.extend(candidates.iter().map(|(_, p)| p.to_string()));
    let vectors = embedder.embed(&texts)?;
    let mut best: Option<StepMatch> = None;
    for ((id, _), v) in candidates.iter().zip(&vectors[1..]) {
        let c = vectors[0].cosine(v);
        if best.as_ref().is_none_or(|b| c > b.cosine) {
            best = Some(StepMatch {
                step_id: id.to_string(),
                cosine: c,
            });
        }
    }
    Ok(best)
}

/// Best canonical-phrase match across all steps when its cosine reaches
/// `threshold`; ties go to the earlier step.
pub fn match_to_step(
    instruction: &str,
    script: &ActivityScript,
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<Option<StepMatch>, ProviderError> {
    let candidates = script.steps.iter().flat_map(|s| {
        s.phrases()
            .into_iter()
            .map(move |p| (s.step_id.as_str(), p))
    });
    Ok(best_match(instruction, candidates, embedder)?.filter(|m| m.cosine >= threshold - 1e-12))
}

/// The instruction names an action from another variant of the activity.
pub fn matches_out_of_variant(
    instruction: &str,
    script: &ActivityScript,
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<bool, ProviderError> {
    let candidates = script
        .out_of_variant
        .iter()
        .map(|p| (p.as_str(), p.as_str()));
    Ok(best_match(instruction, candidates, embedder)?
        .is_some_and(|m| m.cosine >= threshold - 1e-12))
}

/// True when the instruction carries the explicit marker or is close to one
/// of [`DONE_PHRASES`].
pub fn detect_done(
    instruction: &str,
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<bool, ProviderError> {
    if instruction
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| w == DONE_MARKER)
    {
        return Ok(true);
    }
    if words(instruction).is_empty() {
        return Ok(false);
    }
    let candidates = DONE_PHRASES.iter().map(|p| (*p, *p));
    Ok(best_match(instruction, candidates, embedder)?
        .is_some_and(|m| m.cosine >= threshold - 1e-12))
}

/// Lowercased words joined by single spaces, actor prefix removed. Used to
/// count distinct unmatched suggestions.
pub fn normalize_instruction(text: &str) -> String {
    words(strip_actor(text)).join(" ")
}
