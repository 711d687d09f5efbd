//! Prompt assembly: example retrieval, templates, budget fitting, parsing.

pub mod budget;
pub mod parse;
pub mod retrieval;
pub mod templates;

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;
use crate::providers::{Embedder, ProviderError};

pub use budget::fit_to_budget;
pub use parse::{parse_completion, parse_continuation};
pub use retrieval::{retrieve_examples, Retrieved};
pub use templates::{build_lta_prompt, build_vpa_prompt, PromptParts};

/// Maximum number of in-context examples.
pub const DEFAULT_EXAMPLES: usize = 8;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("goal conditioning is on but the goal is empty")]
    MissingGoal,
    #[error("history has no narrations")]
    EmptyHistory,
    #[error("example pool is empty")]
    EmptyPool,
    #[error(
        "history alone needs {tokens} tokens (+{reserved} reserved) over a limit of {limit}; summarise the history first"
    )]
    Overflow {
        tokens: usize,
        reserved: usize,
        limit: usize,
    },
    #[error("embedding failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("example pool line {line}: {message}")]
    Pool { line: usize, message: String },
    #[error("example pool io: {0}")]
    Io(#[from] std::io::Error),
}

/// One in-context example: a narration or step sequence from a training
/// video, with its goal for planning and online pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptExample {
    pub example_id: String,
    pub narrations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector>,
}

impl PromptExample {
    pub fn new(
        example_id: impl Into<String>,
        narrations: Vec<String>,
        goal: Option<String>,
    ) -> Self {
        Self {
            example_id: example_id.into(),
            narrations,
            goal,
            embedding: None,
        }
    }

    /// The text embedded for retrieval.
    pub fn joined(&self) -> String {
        joined(&self.narrations)
    }
}

pub fn joined(narrations: &[String]) -> String {
    narrations.join(" ")
}

/// The final prompt text and what went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub text: String,
    pub token_count: usize,
    pub examples_used: Vec<String>,
    pub reserved_vision_tokens: usize,
    /// Continuation cue the prompt ends with, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue: Option<String>,
}

/// Example pool with embeddings filled in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExamplePool {
    examples: Vec<PromptExample>,
}

impl ExamplePool {
    /// Computes any missing embeddings with `embedder`.
    pub fn new(
        mut examples: Vec<PromptExample>,
        embedder: &dyn Embedder,
    ) -> Result<Self, PromptError> {
        let missing: Vec<usize> = (0..examples.len())
            .filter(|i| examples[*i].embedding.is_none())
            .collect();
        if !missing.is_empty() {
            let texts: Vec<String> = missing.iter().map(|i| examples[*i].joined()).collect();
            let vecs = embedder.embed(&texts)?;
            for (i, v) in missing.into_iter().zip(vecs) {
                examples[i].embedding = Some(v);
            }
        }
        Ok(Self { examples })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn examples(&self) -> &[PromptExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// JSONL, one [`PromptExample`] per line; embeddings optional.
    pub fn load(path: impl AsRef<Path>, embedder: &dyn Embedder) -> Result<Self, PromptError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut examples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            examples.push(serde_json::from_str(&line).map_err(|e| PromptError::Pool {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Self::new(examples, embedder)
    }
}
