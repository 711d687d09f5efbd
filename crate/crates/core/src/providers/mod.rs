//! Model-service contracts.
//!
//! Every model the pipelines touch sits behind one of four traits:
//! [`LanguageModel`], [`Embedder`], [`Narrator`] and [`VisionEncoder`], plus
//! a [`Tokenizer`] for budget accounting. [`stub`] holds deterministic
//! implementations for desk-scale runs, [`http`] the JSON-over-HTTP adapters
//! for real backends.

pub mod http;
pub mod stub;
pub mod tokenizer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;
use crate::types::{Narration, VideoSegment, VisionTokenBlock};

pub use tokenizer::{HeuristicTokenizer, Tokenizer, WordTokenizer};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error(
        "prompt needs {tokens} tokens (+{reserved} reserved) but the context limit is {limit}"
    )]
    Budget {
        tokens: usize,
        reserved: usize,
        limit: usize,
    },
    #[error("{provider}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        provider: String,
        attempts: u32,
        message: String,
    },
    #[error("{provider}: bad response: {message}")]
    Response { provider: String, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("clip of {duration_s:.2} s is shorter than the provider minimum of {minimum_s:.2} s")]
    ClipTooShort { duration_s: f64, minimum_s: f64 },
    #[error("{0}")]
    Unavailable(String),
}

impl ProviderError {
    /// Transport failures and outages may succeed when retried later.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::Unavailable(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Llm,
    Embedder,
    Narrator,
    VisionEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderDescriptor {
    pub kind: ProviderKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_limit: Option<usize>,
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl ProviderDescriptor {
    pub fn stub(kind: ProviderKind, name: &str) -> Self {
        Self {
            kind,
            name: name.to_string(),
            context_limit: (kind == ProviderKind::Llm).then_some(DEFAULT_CONTEXT_LIMIT),
            deterministic: true,
            endpoint: None,
        }
    }
}

pub const DEFAULT_CONTEXT_LIMIT: usize = 2048;

pub trait LanguageModel: Send + Sync {
    fn descriptor(&self) -> ProviderDescriptor;

    /// Greedy completion of `prompt`. With a vision block, real backends
    /// condition on it; stubs only record it.
    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError>;
}

pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> ProviderDescriptor;

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut v = self.embed(&[text.to_string()])?;
        v.pop()
            .ok_or_else(|| ProviderError::Argument("embedder returned no vector".into()))
    }
}

pub trait Narrator: Send + Sync {
    fn descriptor(&self) -> ProviderDescriptor;

    fn narrate(&self, clip: &VideoSegment, k: usize) -> Result<Vec<Narration>, ProviderError>;
}

pub trait VisionEncoder: Send + Sync {
    fn descriptor(&self) -> ProviderDescriptor;

    fn encode(&self, segments: &[VideoSegment]) -> Result<VisionTokenBlock, ProviderError>;
}

/// Counts prompt tokens against the model's context limit before calling it;
/// an over-budget prompt is rejected without a model call.
pub fn complete_within_budget(
    llm: &dyn LanguageModel,
    tokenizer: &dyn Tokenizer,
    prompt: &str,
    max_new_tokens: usize,
    vision: Option<&VisionTokenBlock>,
) -> Result<String, ProviderError> {
    let limit = llm
        .descriptor()
        .context_limit
        .unwrap_or(DEFAULT_CONTEXT_LIMIT);
    let tokens = tokenizer.count(prompt);
    let reserved = vision.map_or(0, |v| v.token_count);
    if tokens + reserved > limit {
        return Err(ProviderError::Budget {
            tokens,
            reserved,
            limit,
        });
    }
    llm.complete(prompt, max_new_tokens, vision)
}

/// The provider handles one pipeline or session needs. Summarisation and goal
/// generation may use a different language model than prediction.
#[derive(Clone)]
pub struct Providers {
    pub llm: Arc<dyn LanguageModel>,
    pub embedder: Arc<dyn Embedder>,
    pub tokenizer: Arc<dyn Tokenizer>,
    pub narrator: Option<Arc<dyn Narrator>>,
    pub vision: Option<Arc<dyn VisionEncoder>>,
    pub summary_llm: Option<Arc<dyn LanguageModel>>,
    pub goal_llm: Option<Arc<dyn LanguageModel>>,
}

impl Providers {
    pub fn new(llm: Arc<dyn LanguageModel>, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            llm,
            embedder,
            tokenizer: Arc::new(WordTokenizer),
            narrator: None,
            vision: None,
            summary_llm: None,
            goal_llm: None,
        }
    }

    pub fn with_tokenizer(mut self, tokenizer: Arc<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn with_narrator(mut self, narrator: Arc<dyn Narrator>) -> Self {
        self.narrator = Some(narrator);
        self
    }

    pub fn with_vision(mut self, vision: Arc<dyn VisionEncoder>) -> Self {
        self.vision = Some(vision);
        self
    }

    pub fn with_summary_llm(mut self, llm: Arc<dyn LanguageModel>) -> Self {
        self.summary_llm = Some(llm);
        self
    }

    pub fn with_goal_llm(mut self, llm: Arc<dyn LanguageModel>) -> Self {
        self.goal_llm = Some(llm);
        self
    }

    pub fn summarizer(&self) -> &dyn LanguageModel {
        self.summary_llm.as_deref().unwrap_or(self.llm.as_ref())
    }

    pub fn goal_generator(&self) -> &dyn LanguageModel {
        self.goal_llm.as_deref().unwrap_or(self.llm.as_ref())
    }
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers")
            .field("llm", &self.llm.descriptor().name)
            .field("embedder", &self.embedder.descriptor().name)
            .field("tokenizer", &self.tokenizer.name())
            .finish_non_exhaustive()
    }
}
