//! Video-history-grounded activity assistance.
//!
//! The crate is organised around the flow of a prediction:
//!
//! - [`types`], [`vocab`], [`script`], [`dataset`], [`session_log`]: domain
//!   values and their on-disk formats.
//! - [`metrics`]: edit distance, mean accuracy, mIoU and success rate.
//! - [`vocab_map`]: free-form sentences to closed-set `(verb, noun)` labels.
//! - [`prompting`]: retrieval of in-context examples, prompt templates,
//!   token-budget fitting and completion parsing.
//! - [`providers`]: model-service contracts, deterministic stubs and
//!   JSON-over-HTTP adapters.
//! - [`pipelines`]: the Socratic and vision-conditioned predictors.
//! - [`history`]: online history construction from an unsegmented stream.
//! - [`bench`]: offline benchmark runners.
//! - [`session`]: the user-in-the-loop protocol engine, simulated user and
//!   skip analytics.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod goldens;
pub mod history;
pub mod jobs;
pub mod metrics;
pub mod pipelines;
pub mod prompting;
pub mod providers;
pub mod script;
pub mod session;
pub mod session_log;
pub mod synthetic;
pub mod text;
pub mod types;
pub mod vocab;
pub mod vocab_map;

pub use embedding::EmbeddingVector;
pub use script::ActivityScript;
pub use types::{
    ActionLabel, ActionSequence, BenchmarkSample, FrameRef, Narration, NarrationSource, Span,
    SuggestionOutcome, SuggestionRecord, Task, VideoSegment, VisionTokenBlock, VisualHistory,
};
pub use vocab::Vocabulary;
