//! Socratic and vision-conditioned (VCLM) predictors.
//!
//! Both kinds run the same code path: retrieve examples, build the prompt,
//! fit it to the context budget, complete, parse, pad or truncate to `Z`,
//! and map to the closed vocabulary unless open-set output is requested.
//! The only differences are the vision tokens reserved in the budget and the
//! vision block passed to the language model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::templates::{lta_parts, no_text_history_prompt, vpa_parts};
use crate::prompting::{
    fit_to_budget, parse_continuation, retrieve_examples, AssembledPrompt, ExamplePool,
    PromptError, PromptExample, DEFAULT_EXAMPLES,
};
use crate::providers::{complete_within_budget, ProviderError, Providers, DEFAULT_CONTEXT_LIMIT};
use crate::types::{
    ActionLabel, ActionSequence, Span, Task, VideoSegment, VisionTokenBlock, VisualHistory,
    DEFAULT_VISION_TOKENS,
};
use crate::vocab::Vocabulary;
use crate::vocab_map::{MapError, TermIndex, VocabMapper};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid predictor config: {0}")]
    Config(String),
    #[error("history has no narrations")]
    EmptyHistory,
    #[error("goal conditioning is on but the history has no goal")]
    MissingGoal,
    #[error("closed-set output needs a vocabulary")]
    MissingVocabulary,
    #[error("no numbered step in {attempts} completions")]
    EmptyPrediction { attempts: u32 },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Map(#[from] MapError),
}

impl PipelineError {
    pub fn is_provider(&self) -> bool {
        matches!(self, Self::Provider(_)) || matches!(self, Self::Prompt(PromptError::Provider(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Socratic,
    Vclm,
}

impl PredictorKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Socratic => "Socratic",
            Self::Vclm => "VCLM",
        }
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "socratic" => Ok(Self::Socratic),
            "vclm" => Ok(Self::Vclm),
            other => Err(format!(
                "unknown predictor `{other}` (expected socratic or vclm)"
            )),
        }
    }
}

fn default_examples() -> usize {
    DEFAULT_EXAMPLES
}
fn default_context() -> usize {
    DEFAULT_CONTEXT_LIMIT
}
fn default_max_new() -> usize {
    512
}
fn default_retries() -> u32 {
    2
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub task: Task,
    pub z: usize,
    #[serde(default = "yes")]
    pub goal_conditioning: bool,
    #[serde(default = "yes")]
    pub use_text_history: bool,
    #[serde(default = "default_context")]
    pub context_limit: usize,
    #[serde(default)]
    pub vision_tokens: usize,
    #[serde(default)]
    pub open_set_output: bool,
    #[serde(default = "default_examples")]
    pub num_examples: usize,
    #[serde(default = "default_max_new")]
    pub max_new_tokens: usize,
    /// Extra attempts with the identical prompt when nothing parses.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

impl PredictorConfig {
    pub fn socratic(task: Task, z: usize) -> Self {
        Self {
            kind: PredictorKind::Socratic,
            task,
            z,
            goal_conditioning: task == Task::Vpa,
            use_text_history: true,
            context_limit: DEFAULT_CONTEXT_LIMIT,
            vision_tokens: 0,
            open_set_output: false,
            num_examples: DEFAULT_EXAMPLES,
            max_new_tokens: default_max_new(),
            max_retries: default_retries(),
        }
    }

    pub fn vclm(task: Task, z: usize) -> Self {
        Self {
            kind: PredictorKind::Vclm,
            vision_tokens: DEFAULT_VISION_TOKENS,
            ..Self::socratic(task, z)
        }
    }

    pub fn of_kind(kind: PredictorKind, task: Task, z: usize) -> Self {
        match kind {
            PredictorKind::Socratic => Self::socratic(task, z),
            PredictorKind::Vclm => Self::vclm(task, z),
        }
    }

    /// Single-step, goal-conditioned, open-set configuration used online.
    pub fn online(kind: PredictorKind) -> Self {
        Self {
            open_set_output: true,
            goal_conditioning: true,
            ..Self::of_kind(kind, Task::Vpa, 1)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.z == 0 {
            return bad("z must be positive");
        }
        if self.kind == PredictorKind::Socratic
            && (self.vision_tokens != 0 || !self.use_text_history)
        {
            return bad("socratic predictors reserve no vision tokens and always use text history");
        }
        if self.kind == PredictorKind::Vclm && self.vision_tokens == 0 {
            return bad("vclm predictors reserve vision tokens");
        }
        if self.vision_tokens >= self.context_limit {
            return bad("vision tokens must leave room for text");
        }
        Ok(())
    }

    pub fn reserved(&self) -> usize {
        self.vision_tokens
    }
}

/// One prediction with everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub prompt: AssembledPrompt,
    pub completion: String,
    /// Parsed sentences, at most `Z`.
    pub raw_sentences: Vec<String>,
    /// Exactly `Z` labels when closed-set output is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapped: Option<ActionSequence>,
    pub attempts: u32,
    /// Nothing parsed after all retries; `mapped` is all `NO_ACTION`.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vision_ref: Option<String>,
}

#[derive(Clone)]
pub struct Predictor {
    config: PredictorConfig,
    providers: Providers,
    pool: Arc<ExamplePool>,
    vocab: Option<(Arc<Vocabulary>, Arc<TermIndex>)>,
}

impl Predictor {
    pub fn new(
        config: PredictorConfig,
        providers: Providers,
        pool: Arc<ExamplePool>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            config,
            providers,
            pool,
            vocab: None,
        })
    }

    /// Enables closed-set mapping; term embeddings are computed here once.
    pub fn with_vocabulary(mut self, vocab: Arc<Vocabulary>) -> Result<Self, PipelineError> {
        let index = Arc::new(TermIndex::new(&vocab, self.providers.embedder.as_ref())?);
        self.vocab = Some((vocab, index));
        Ok(self)
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }

    fn text_history(&self) -> bool {
        self.config.use_text_history
    }

    fn build_prompt(
        &self,
        history: &VisualHistory,
        cfg: &PredictorConfig,
    ) -> Result<AssembledPrompt, PipelineError> {
        if !cfg.use_text_history {
            let text = no_text_history_prompt(cfg.z);
            return Ok(AssembledPrompt {
                token_count: self.providers.tokenizer.count(&text),
                text,
                examples_used: Vec::new(),
                reserved_vision_tokens: cfg.reserved(),
                cue: None,
            });
        }
        let lines = history.narration_texts();
        let examples: Vec<PromptExample> = if self.pool.is_empty() || cfg.num_examples == 0 {
            Vec::new()
        } else {
            retrieve_examples(
                &lines,
                &self.pool,
                cfg.num_examples,
                self.providers.embedder.as_ref(),
            )?
            .prompt_examples()
        };
        let parts = match cfg.task {
            Task::Lta => lta_parts(&examples, &lines, cfg.z),
            Task::Vpa => vpa_parts(
                history.goal.as_deref(),
                &examples,
                &lines,
                cfg.z,
                cfg.goal_conditioning,
            )?,
        };
        Ok(fit_to_budget(
            &parts,
            self.providers.tokenizer.as_ref(),
            cfg.context_limit,
            cfg.reserved(),
        )?)
    }

    fn vision_block(
        &self,
        history: &VisualHistory,
        cfg: &PredictorConfig,
    ) -> Result<Option<VisionTokenBlock>, PipelineError> {
        if cfg.kind != PredictorKind::Vclm {
            return Ok(None);
        }
        if let Some(b) = &history.vision_block {
            return Ok(Some(b.clone()));
        }
        let Some(encoder) = &self.providers.vision else {
            return Err(ProviderError::Unavailable(
                "no vision encoder configured; fall back to the Socratic pipeline".into(),
            )
            .into());
        };
        let segments: Vec<VideoSegment> = if history.segments.is_empty() {
            history
                .narrations
                .iter()
                .map(|n| VideoSegment {
                    span: n.span,
                    frame_refs: Vec::new(),
                    gt_action: None,
                })
                .collect()
        } else {
            history.segments.clone()
        };
        let segments = if segments.is_empty() {
            vec![VideoSegment {
                span: Span::new(0.0, 0.0).expect("valid span"),
                frame_refs: Vec::new(),
                gt_action: None,
            }]
        } else {
            segments
        };
        let mut block = encoder.encode(&segments)?;
        block.token_count = cfg.vision_tokens;
        Ok(Some(block))
    }

    fn run(
        &self,
        history: &VisualHistory,
        cfg: &PredictorConfig,
    ) -> Result<Prediction, PipelineError> {
        if history.narrations.is_empty() && cfg.use_text_history {
            return Err(PipelineError::EmptyHistory);
        }
        if cfg.use_text_history
            && cfg.task == Task::Vpa
            && cfg.goal_conditioning
            && history.goal.is_none()
        {
            return Err(PipelineError::MissingGoal);
        }
        let prompt = self.build_prompt(history, cfg)?;
        let vision = self.vision_block(history, cfg)?;
        let mut attempts = 0;
        let mut completion = String::new();
        let mut sentences = Vec::new();
        while attempts <= cfg.max_retries {
            attempts += 1;
            completion = complete_within_budget(
                self.providers.llm.as_ref(),
                self.providers.tokenizer.as_ref(),
                &prompt.text,
                cfg.max_new_tokens,
                vision.as_ref(),
            )?;
            sentences = parse_continuation(&completion, prompt.cue.as_deref());
            if !sentences.is_empty() {
                break;
            }
            tracing::debug!(attempt = attempts, "completion had no numbered steps");
        }
        let failed = sentences.is_empty();
        sentences.truncate(cfg.z);
        let mapped = if cfg.open_set_output {
            None
        } else {
            let (vocab, index) = self
                .vocab
                .as_ref()
                .ok_or(PipelineError::MissingVocabulary)?;
            let seq = if failed {
                ActionSequence::from_labels(Vec::new())
            } else {
                VocabMapper::with_index(vocab, self.providers.embedder.as_ref(), index.clone())?
                    .map_sequence(&sentences)
            };
            Some(ActionSequence::new(seq.fitted(cfg.z), cfg.z).expect("z validated"))
        };
        Ok(Prediction {
            prompt,
            completion,
            raw_sentences: sentences,
            mapped,
            attempts,
            failed,
            vision_ref: vision.map(|v| v.payload),
        })
    }

    /// Multi-step prediction of `config.z` actions.
    pub fn predict(&self, history: &VisualHistory) -> Result<Prediction, PipelineError> {
        self.run(history, &self.config)
    }

    /// Multi-step prediction with a different horizon.
    pub fn predict_z(
        &self,
        history: &VisualHistory,
        z: usize,
    ) -> Result<Prediction, PipelineError> {
        let cfg = PredictorConfig {
            z,
            ..self.config.clone()
        };
        cfg.validate()?;
        self.run(history, &cfg)
    }

    /// One open-set instruction for the user; `Z` is forced to 1.
    pub fn predict_next(&self, history: &VisualHistory) -> Result<String, PipelineError> {
        self.predict_next_detailed(history).map(|(s, _)| s)
    }

    pub fn predict_next_detailed(
        &self,
        history: &VisualHistory,
    ) -> Result<(String, Prediction), PipelineError> {
        let cfg = PredictorConfig {
            z: 1,
            open_set_output: true,
            ..self.config.clone()
        };
        let p = self.run(history, &cfg)?;
        match p.raw_sentences.first() {
            Some(s) => Ok((s.clone(), p)),
            None => Err(PipelineError::EmptyPrediction {
                attempts: p.attempts,
            }),
        }
    }

    /// All-`NO_ACTION` sequence of length `Z`.
    pub fn no_action_sequence(&self) -> ActionSequence {
        ActionSequence::new(vec![ActionLabel::no_action(); self.config.z], self.config.z)
            .expect("z validated")
    }

    pub fn uses_text_history(&self) -> bool {
        self.text_history()
    }
}
