//! Online visual history: uniform segmentation of the stream, several
//! narrations per clip, greedy semantic clustering, goal-conditioned
//! summarisation, and pseudo-goal generation for example pools.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;
use crate::prompting::parse::parse_continuation;
use crate::prompting::templates::{render_goal_prompt, render_summarization_prompt, SUMMARY_CUE};
use crate::providers::{
    complete_within_budget, Embedder, LanguageModel, ProviderError, Providers, Tokenizer,
};
use crate::types::{FrameRef, Narration, NarrationSource, Span, VideoSegment, VisualHistory};

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("empty history")]
    EmptyHistory,
    #[error("frame `{id}` has no timestamp")]
    MissingTimestamp { id: String },
    #[error("frames out of order at t = {timestamp_s} s")]
    OutOfOrder { timestamp_s: f64 },
    #[error("frames were ingested but no narrator is configured")]
    MissingNarrator,
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: ProviderError,
    },
    #[error("goal generation returned no valid JSON goal list in {attempts} attempts")]
    GoalGeneration { attempts: u32 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

impl HistoryError {
    pub fn is_provider(&self) -> bool {
        matches!(self, Self::Stage { .. })
    }
}

fn stage(name: &'static str) -> impl Fn(ProviderError) -> HistoryError {
    move |source| HistoryError::Stage {
        stage: name,
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crop {
    pub from: [u32; 2],
    pub to: [u32; 2],
}

impl Default for Crop {
    fn default() -> Self {
        Self {
            from: [1400, 1400],
            to: [288, 384],
        }
    }
}

fn default_fps() -> u32 {
    10
}
fn default_clip() -> f64 {
    2.0
}
fn default_k() -> usize {
    10
}
fn default_tau() -> f64 {
    0.9
}

/// Stream handling parameters. The crop is recorded metadata only; pixel
/// work happens in the narrator or upstream capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    #[serde(default = "default_fps")]
    pub fps: u32,
    #[serde(default = "default_clip")]
    pub clip_seconds: f64,
    #[serde(default = "default_k")]
    pub narrations_per_clip: usize,
    #[serde(default)]
    pub crop: Crop,
    #[serde(default = "default_tau")]
    pub cluster_threshold: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            fps: default_fps(),
            clip_seconds: default_clip(),
            narrations_per_clip: default_k(),
            crop: Crop::default(),
            cluster_threshold: default_tau(),
        }
    }
}

impl StreamConfig {
    pub fn frames_per_clip(&self) -> usize {
        (self.fps as f64 * self.clip_seconds).round() as usize
    }

    pub fn validate(&self) -> Result<(), HistoryError> {
        if self.fps == 0
            || self.clip_seconds.is_nan()
            || self.clip_seconds <= 0.0
            || self.narrations_per_clip == 0
        {
            return Err(HistoryError::Argument(
                "fps, clip length and narrations per clip must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cluster_threshold) {
            return Err(HistoryError::Argument(
                "cluster threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

const EPS: f64 = 1e-9;

/// Consecutive non-overlapping clips of `clip_seconds` covering
/// `[t_first, t_last + 1/fps]`. A final partial clip longer than half a clip
/// is kept; a shorter one (or exactly half) is merged into the previous clip.
pub fn segment_stream(
    frames: &[FrameRef],
    cfg: &StreamConfig,
) -> Result<Vec<VideoSegment>, HistoryError> {
    cfg.validate()?;
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    let mut times = Vec::with_capacity(frames.len());
    for f in frames {
        let t = f
            .timestamp_s
            .ok_or_else(|| HistoryError::MissingTimestamp { id: f.id.clone() })?;
        if times.last().is_some_and(|prev: &f64| t < *prev) {
            return Err(HistoryError::OutOfOrder { timestamp_s: t });
        }
        times.push(t);
    }
    let t0 = times[0];
    let end = times[times.len() - 1] + 1.0 / cfg.fps as f64;
    let clip = cfg.clip_seconds;
    let total = end - t0;
    let full = ((total + EPS) / clip).floor() as usize;
    let remainder = total - full as f64 * clip;
    let mut bounds: Vec<(f64, f64)> = (0..full)
        .map(|i| (t0 + i as f64 * clip, t0 + (i + 1) as f64 * clip))
        .collect();
    if remainder > EPS {
        if bounds.is_empty() || remainder > clip / 2.0 + EPS {
            let start = bounds.last().map_or(t0, |b| b.1);
            bounds.push((start, end));
        } else {
            bounds.last_mut().expect("non-empty").1 = end;
        }
    } else if let Some(last) = bounds.last_mut() {
        last.1 = end;
    }
    let mut segments: Vec<VideoSegment> = bounds
        .iter()
        .map(|(s, e)| VideoSegment {
            span: Span::new(*s, *e).expect("ordered bounds"),
            frame_refs: Vec::new(),
            gt_action: None,
        })
        .collect();
    for (f, t) in frames.iter().zip(&times) {
        let idx = (((t - t0) / clip + EPS).floor() as usize).min(segments.len() - 1);
        segments[idx].frame_refs.push(f.clone());
    }
    Ok(segments)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationCluster {
    pub members: Vec<Narration>,
    pub representative: Narration,
    pub centroid: EmbeddingVector,
    #[serde(skip)]
    member_vectors: Vec<EmbeddingVector>,
}

/// Greedy single pass over time-ordered narrations: each narration joins the
/// most recent cluster whose centroid has cosine at least `tau`, otherwise it
/// opens a new cluster. The representative is the earliest member and the
/// centroid the renormalised mean of member embeddings.
pub fn cluster_narrations(
    narrations: &[Narration],
    embedder: &dyn Embedder,
    tau: f64,
) -> Result<Vec<NarrationCluster>, ProviderError> {
    if narrations.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = narrations.iter().map(|n| n.text.clone()).collect();
    let vectors = embedder.embed(&texts)?;
    let mut clusters: Vec<NarrationCluster> = Vec::new();
    for (n, v) in narrations.iter().zip(vectors) {
        let target = clusters
            .iter()
            .rposition(|c| c.centroid.cosine(&v) >= tau - EPS);
        match target {
            Some(i) => {
                let c = &mut clusters[i];
                c.members.push(n.clone());
                c.member_vectors.push(v);
                c.centroid =
                    EmbeddingVector::centroid(&c.member_vectors).expect("non-empty cluster");
            }
            None => clusters.push(NarrationCluster {
                members: vec![n.clone()],
                representative: n.clone(),
                centroid: v.normalized(),
                member_vectors: vec![v],
            }),
        }
    }
    Ok(clusters)
}

/// Summarised narrations and whether the fallback to cluster
/// representatives was taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub narrations: Vec<Narration>,
    pub fallback: bool,
    pub prompt: String,
}

pub const SUMMARY_ATTEMPTS: u32 = 2;
pub const SUMMARY_MAX_NEW_TOKENS: usize = 512;

/// `"A person "` followed by the narration with any existing actor prefix
/// (in any case) removed.
pub fn with_person_prefix(text: &str) -> String {
    let t = text.trim();
    let rest = if t.len() >= 9 && t[..9].eq_ignore_ascii_case("a person ") {
        t[9..].trim_start()
    } else {
        t
    };
    let mut chars = rest.chars();
    let rest = match (chars.next(), chars.clone().next()) {
        (Some(c), Some(d)) if c.is_uppercase() && !d.is_uppercase() => {
            format!("{}{}", c.to_lowercase(), chars.as_str())
        }
        _ => rest.to_string(),
    };
    format!("A person {rest}")
}

fn covering_span(narrations: &[Narration]) -> Span {
    narrations
        .iter()
        .skip(1)
        .fold(narrations[0].span, |acc, n| acc.union(&n.span))
}

/// Goal-conditioned summarisation. Output spans split the covering span of
/// the input evenly, in order.
pub fn summarize_history(
    goal: &str,
    narrations: &[Narration],
    llm: &dyn LanguageModel,
    tokenizer: &dyn Tokenizer,
) -> Result<Summary, HistoryError> {
    if goal.trim().is_empty() {
        return Err(HistoryError::Argument("summarisation needs a goal".into()));
    }
    if narrations.is_empty() {
        return Err(HistoryError::EmptyHistory);
    }
    let texts: Vec<String> = narrations.iter().map(|n| n.text.clone()).collect();
    let prompt = render_summarization_prompt(goal, &texts);
    let mut items = Vec::new();
    for _ in 0..SUMMARY_ATTEMPTS {
        let completion =
            complete_within_budget(llm, tokenizer, &prompt, SUMMARY_MAX_NEW_TOKENS, None)
                .map_err(stage("summarize"))?;
        items = parse_continuation(&completion, Some(SUMMARY_CUE));
        if !items.is_empty() {
            break;
        }
    }
    if items.is_empty() {
        tracing::warn!("summary had no numbered lines; using cluster representatives");
        return Ok(Summary {
            narrations: narrations.to_vec(),
            fallback: true,
            prompt,
        });
    }
    let cover = covering_span(narrations);
    let step = cover.duration_s() / items.len() as f64;
    let out = items
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let start = cover.start_s() + i as f64 * step;
            let end = if i + 1 == items.len() {
                cover.end_s()
            } else {
                start + step
            };
            Narration::new(
                with_person_prefix(t),
                Span::new(start, end.max(start)).expect("ordered"),
                NarrationSource::Summarizer,
            )
            .expect("non-empty text")
        })
        .collect();
    Ok(Summary {
        narrations: out,
        fallback: false,
        prompt,
    })
}

pub const GOAL_ATTEMPTS: u32 = 3;
const GOAL_PREFIX: &str = "They wanted to ";

fn extract_goal(text: &str) -> Option<String> {
    let start = text.find('[')?;
    let end = text.rfind(']')?;
    if end < start {
        return None;
    }
    let list: Vec<serde_json::Value> = serde_json::from_str(&text[start..=end]).ok()?;
    let mut best: Option<(String, f64)> = None;
    for entry in list {
        let goal = entry
            .get("user_goal")
            .and_then(|g| g.as_str())
            .map(str::trim);
        let conf = entry.get("confidence").and_then(|c| c.as_f64());
        let (Some(goal), Some(conf)) = (goal, conf) else {
            continue;
        };
        if goal.is_empty() || !(0.0..=1.0).contains(&conf) {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| conf > *b) {
            best = Some((goal.to_string(), conf));
        }
    }
    best.map(|(g, _)| g)
}

fn format_goal(goal: &str) -> String {
    if goal.len() >= GOAL_PREFIX.len()
        && goal[..GOAL_PREFIX.len()].eq_ignore_ascii_case(GOAL_PREFIX)
    {
        format!("{GOAL_PREFIX}{}", &goal[GOAL_PREFIX.len()..])
    } else {
        format!("{GOAL_PREFIX}{goal}")
    }
}

/// Pseudo-goal for a narration history: the highest-confidence entry of the
/// model's JSON list (earliest on ties), as `"They wanted to ..."`.
pub fn generate_goal(
    narrations: &[String],
    llm: &dyn LanguageModel,
    tokenizer: &dyn Tokenizer,
) -> Result<String, HistoryError> {
    if narrations.is_empty() {
        return Err(HistoryError::EmptyHistory);
    }
    let prompt = render_goal_prompt(narrations);
    for _ in 0..GOAL_ATTEMPTS {
        let completion =
            complete_within_budget(llm, tokenizer, &prompt, SUMMARY_MAX_NEW_TOKENS, None)
                .map_err(stage("goal"))?;
        if let Some(g) = extract_goal(&completion) {
            return Ok(format_goal(&g));
        }
    }
    Err(HistoryError::GoalGeneration {
        attempts: GOAL_ATTEMPTS,
    })
}

/// The encoded history plus audit details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedHistory {
    pub history: VisualHistory,
    pub raw_narrations: usize,
    pub clusters: usize,
    pub summary_fallback: bool,
    pub summary_prompt: String,
}

/// Segment, narrate, cluster and summarise everything observed so far.
/// Directly ingested narrations skip segmentation and narration.
pub fn encode_online_history(
    frames: &[FrameRef],
    narrations: &[Narration],
    goal: &str,
    cfg: &StreamConfig,
    providers: &Providers,
    with_vision: bool,
) -> Result<EncodedHistory, HistoryError> {
    if frames.is_empty() && narrations.is_empty() {
        return Err(HistoryError::EmptyHistory);
    }
    let segments = segment_stream(frames, cfg)?;
    let mut all: Vec<Narration> = narrations.to_vec();
    if !segments.is_empty() {
        let narrator = providers
            .narrator
            .as_ref()
            .ok_or(HistoryError::MissingNarrator)?;
        let per_clip: Vec<Result<Vec<Narration>, ProviderError>> = segments
            .par_iter()
            .map(|s| narrator.narrate(s, cfg.narrations_per_clip))
            .collect();
        for r in per_clip {
            all.extend(r.map_err(stage("narrate"))?);
        }
    }
    all.sort_by(|a, b| a.span.start_s().total_cmp(&b.span.start_s()));
    let clusters = cluster_narrations(&all, providers.embedder.as_ref(), cfg.cluster_threshold)
        .map_err(stage("cluster"))?;
    let reps: Vec<Narration> = clusters.iter().map(|c| c.representative.clone()).collect();
    let summary = summarize_history(
        goal,
        &reps,
        providers.summarizer(),
        providers.tokenizer.as_ref(),
    )?;
    let vision_block = if with_vision {
        match &providers.vision {
            Some(enc) => {
                let segs: Vec<VideoSegment> = if segments.is_empty() {
                    all.iter()
                        .map(|n| VideoSegment {
                            span: n.span,
                            frame_refs: Vec::new(),
                            gt_action: None,
                        })
                        .collect()
                } else {
                    segments.clone()
                };
                Some(enc.encode(&segs).map_err(stage("encode"))?)
            }
            None => None,
        }
    } else {
        None
    };
    Ok(EncodedHistory {
        history: VisualHistory {
            segments,
            narrations: summary.narrations,
            goal: Some(goal.to_string()),
            vision_block,
        },
        raw_narrations: all.len(),
        clusters: clusters.len(),
        summary_fallback: summary.fallback,
        summary_prompt: summary.prompt,
    })
}
