//! Domain values shared by every module.
//!
//! Everything here is an immutable value once constructed. Verb and noun
//! indices are 0-based into the owning [`Vocabulary`](crate::Vocabulary).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("span start {start_s} is after end {end_s}")]
    InvertedSpan { start_s: f64, end_s: f64 },
    #[error("narration text is empty")]
    EmptyNarration,
    #[error("narration confidence {0} is outside [0, 1]")]
    Confidence(f64),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("vision block must carry at least one token")]
    EmptyVisionBlock,
    #[error("goal must be non-empty when present")]
    EmptyGoal,
    #[error("narrations are not sorted by start time (index {0})")]
    UnsortedNarrations(usize),
    #[error("frame {id} at {timestamp_s}s lies outside segment span")]
    FrameOutsideSpan { id: String, timestamp_s: f64 },
    #[error("suggestion {index} already resolved as {current:?}")]
    AlreadyResolved {
        index: usize,
        current: SuggestionOutcome,
    },
    #[error("cannot resolve a suggestion to pending")]
    ResolveToPending,
}

/// Closed time interval in seconds, serialised as `[start_s, end_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct Span {
    start_s: f64,
    end_s: f64,
}

impl Span {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, TypeError> {
        if start_s.is_nan() || end_s.is_nan() || start_s > end_s {
            return Err(TypeError::InvertedSpan { start_s, end_s });
        }
        Ok(Self { start_s, end_s })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t <= self.end_s
    }

    /// Smallest span covering both.
    pub fn union(&self, other: &Span) -> Span {
        Span {
            start_s: self.start_s.min(other.start_s),
            end_s: self.end_s.max(other.end_s),
        }
    }

    pub fn overlap_s(&self, other: &Span) -> f64 {
        (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0)
    }
}

impl From<Span> for [f64; 2] {
    fn from(s: Span) -> Self {
        [s.start_s, s.end_s]
    }
}

impl TryFrom<[f64; 2]> for Span {
    type Error = TypeError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Span::new(v[0], v[1])
    }
}

/// A `(verb, noun)` label from the closed prediction space.
///
/// The reserved [`ActionLabel::no_action`] label pads short predictions and
/// matches nothing, not even itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionLabel {
    pub verb_index: usize,
    pub noun_index: usize,
    pub verb_text: String,
    pub noun_text: String,
}

const NO_ACTION_INDEX: usize = usize::MAX;
const NO_ACTION_TEXT: &str = "<no_action>";

impl ActionLabel {
    pub fn new(
        verb_index: usize,
        noun_index: usize,
        verb_text: impl Into<String>,
        noun_text: impl Into<String>,
    ) -> Self {
        Self {
            verb_index,
            noun_index,
            verb_text: verb_text.into(),
            noun_text: noun_text.into(),
        }
    }

    pub fn no_action() -> Self {
        Self::new(
            NO_ACTION_INDEX,
            NO_ACTION_INDEX,
            NO_ACTION_TEXT,
            NO_ACTION_TEXT,
        )
    }

    pub fn is_no_action(&self) -> bool {
        self.verb_index == NO_ACTION_INDEX || self.noun_index == NO_ACTION_INDEX
    }

    pub fn action_key(&self) -> Option<(usize, usize)> {
        (!self.is_no_action()).then_some((self.verb_index, self.noun_index))
    }

    pub fn verb_key(&self) -> Option<usize> {
        (!self.is_no_action()).then_some(self.verb_index)
    }

    pub fn noun_key(&self) -> Option<usize> {
        (!self.is_no_action()).then_some(self.noun_index)
    }

    /// `"verb noun"`, the sentence form used by stub planners.
    pub fn phrase(&self) -> String {
        format!("{} {}", self.verb_text, self.noun_text)
    }
}

/// Predicted or ground-truth actions in order, with the horizon `Z` they were
/// produced for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub labels: Vec<ActionLabel>,
    pub horizon: usize,
}

impl ActionSequence {
    pub fn new(labels: Vec<ActionLabel>, horizon: usize) -> Result<Self, TypeError> {
        if horizon == 0 {
            return Err(TypeError::ZeroHorizon);
        }
        Ok(Self { labels, horizon })
    }

    /// Sequence whose horizon is its own length (at least one).
    pub fn from_labels(labels: Vec<ActionLabel>) -> Self {
        let horizon = labels.len().max(1);
        Self { labels, horizon }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Exactly `z` labels: truncated, or padded with `NO_ACTION`.
    pub fn fitted(&self, z: usize) -> Vec<ActionLabel> {
        let mut out: Vec<ActionLabel> = self.labels.iter().take(z).cloned().collect();
        out.resize(z, ActionLabel::no_action());
        out
    }

    /// Length-`z` prefix as a new sequence with horizon `z`.
    pub fn truncated(&self, z: usize) -> Self {
        Self {
            labels: self.labels.iter().take(z).cloned().collect(),
            horizon: z.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrationSource {
    GroundTruth,
    Narrator,
    Summarizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NarrationRepr")]
pub struct Narration {
    pub text: String,
    pub span: Span,
    pub source: NarrationSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Deserialize)]
struct NarrationRepr {
    text: String,
    span: Span,
    source: NarrationSource,
    #[serde(default)]
    confidence: Option<f64>,
}

impl TryFrom<NarrationRepr> for Narration {
    type Error = TypeError;

    fn try_from(r: NarrationRepr) -> Result<Self, Self::Error> {
        let mut n = Narration::new(r.text, r.span, r.source)?;
        if let Some(c) = r.confidence {
            n = n.with_confidence(c)?;
        }
        Ok(n)
    }
}

impl Narration {
    pub fn new(
        text: impl Into<String>,
        span: Span,
        source: NarrationSource,
    ) -> Result<Self, TypeError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(TypeError::EmptyNarration);
        }
        Ok(Self {
            text,
            span,
            source,
            confidence: None,
        })
    }

    pub fn with_confidence(mut self, c: f64) -> Result<Self, TypeError> {
        if !(0.0..=1.0).contains(&c) {
            return Err(TypeError::Confidence(c));
        }
        self.confidence = Some(c);
        Ok(self)
    }
}

/// Opaque frame handle. The core never touches pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_s: Option<f64>,
}

impl FrameRef {
    pub fn at(id: impl Into<String>, timestamp_s: f64) -> Self {
        Self {
            id: id.into(),
            timestamp_s: Some(timestamp_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSegment {
    pub span: Span,
    #[serde(default)]
    pub frame_refs: Vec<FrameRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_action: Option<ActionLabel>,
}

impl VideoSegment {
    pub fn new(span: Span, frame_refs: Vec<FrameRef>) -> Result<Self, TypeError> {
        let seg = Self {
            span,
            frame_refs,
            gt_action: None,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        for f in &self.frame_refs {
            if let Some(t) = f.timestamp_s {
                if !self.span.contains(t) {
                    return Err(TypeError::FrameOutsideSpan {
                        id: f.id.clone(),
                        timestamp_s: t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Continuous visual tokens handed to a vision-conditioned model. The payload
/// is whatever handle the vision encoder returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionTokenBlock {
    pub token_count: usize,
    pub payload: String,
}

pub const DEFAULT_VISION_TOKENS: usize = 256;

impl VisionTokenBlock {
    pub fn new(token_count: usize, payload: impl Into<String>) -> Result<Self, TypeError> {
        if token_count == 0 {
            return Err(TypeError::EmptyVisionBlock);
        }
        Ok(Self {
            token_count,
            payload: payload.into(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisualHistory {
    #[serde(default)]
    pub segments: Vec<VideoSegment>,
    #[serde(default)]
    pub narrations: Vec<Narration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vision_block: Option<VisionTokenBlock>,
}

impl VisualHistory {
    pub fn from_narrations(narrations: Vec<Narration>) -> Self {
        Self {
            narrations,
            ..Self::default()
        }
    }

    pub fn with_goal(mut self, goal: impl Into<String>) -> Self {
        self.goal = Some(goal.into());
        self
    }

    pub fn narration_texts(&self) -> Vec<String> {
        self.narrations.iter().map(|n| n.text.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if let Some(g) = &self.goal {
            if g.trim().is_empty() {
                return Err(TypeError::EmptyGoal);
            }
        }
        for (i, w) in self.narrations.windows(2).enumerate() {
            if w[1].span.start_s() < w[0].span.start_s() {
                return Err(TypeError::UnsortedNarrations(i + 1));
            }
        }
        for s in &self.segments {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Task {
    Lta,
    Vpa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub sample_id: String,
    pub history: VisualHistory,
    pub gt_future: ActionSequence,
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionOutcome {
    Executed,
    SkippedRedundant,
    SkippedInfeasible,
    SkippedIrrelevant,
    /// A provider failure turn; never counted as a skip.
    SystemError,
    Pending,
}

impl SuggestionOutcome {
    pub fn is_skip(self) -> bool {
        matches!(
            self,
            Self::SkippedRedundant | Self::SkippedInfeasible | Self::SkippedIrrelevant
        )
    }

    pub fn is_terminal(self) -> bool {
        self != Self::Pending
    }
}

/// One assistant suggestion and what the user did with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionRecord {
    pub index: usize,
    pub raw_text: String,
    pub mapped_step: Option<String>,
    pub outcome: SuggestionOutcome,
    /// Stream time (seconds) at which the suggestion was issued.
    pub timestamp: f64,
    /// The suggestion was recognised as an activity-complete ("done") step.
    #[serde(default)]
    pub done: bool,
}

impl SuggestionRecord {
    pub fn resolve(&mut self, outcome: SuggestionOutcome) -> Result<(), TypeError> {
        if self.outcome.is_terminal() {
            return Err(TypeError::AlreadyResolved {
                index: self.index,
                current: self.outcome,
            });
        }
        if outcome == SuggestionOutcome::Pending {
            return Err(TypeError::ResolveToPending);
        }
        self.outcome = outcome;
        Ok(())
    }
}
