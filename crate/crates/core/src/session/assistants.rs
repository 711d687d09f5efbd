//! Scripted assistants for closed-loop simulation.
//!
//! [`EchoSummarizer`] answers summarisation and goal prompts without a
//! model. [`OracleLlm`] plans from the script itself: it reads the history
//! lines out of the prompt, works out which steps are done and proposes the
//! next feasible one.

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::Deserialize;

use super::matching::{match_to_step, DEFAULT_MATCH_THRESHOLD};
use crate::history::with_person_prefix;
use crate::prompting::parse::{parse_completion, query_history};
use crate::prompting::templates::SUMMARY_CUE;
use crate::providers::http::{HttpEndpoint, HttpLlm};
use crate::providers::stub::{limit_tokens, FixtureLlm, FixtureTable, SequenceLlm};
use crate::providers::{Embedder, LanguageModel, ProviderDescriptor, ProviderError, ProviderKind};
use crate::script::ActivityScript;
use crate::types::VisionTokenBlock;

pub const SERVE_INSTRUCTION: &str = "Serve the dish";

const SUMMARY_MARKER: &str = "A person is currently attempting to";
const GOAL_MARKER: &str = "The user took these physical actions:";

fn horizon(prompt: &str) -> usize {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)\bnext (\d+)\b").expect("valid regex"));
    re.captures(prompt)
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(1)
}

/// Narration lines listed in a summarisation or goal prompt.
fn listed_narrations(prompt: &str) -> Vec<String> {
    let mut items = parse_completion(prompt);
    if prompt.ends_with(SUMMARY_CUE) {
        items.pop();
    }
    items
}

/// Summarises by dropping consecutive duplicates and normalising the actor
/// prefix; answers goal prompts with a fixed single-entry list.
#[derive(Debug, Default)]
pub struct EchoSummarizer;

impl EchoSummarizer {
    fn answer(prompt: &str) -> Option<String> {
        if prompt.starts_with(SUMMARY_MARKER) {
            let mut lines: Vec<String> = Vec::new();
            for n in listed_narrations(prompt) {
                let n = with_person_prefix(&n);
                if lines.last() != Some(&n) {
                    lines.push(n);
                }
            }
            return Some(
                lines
                    .iter()
                    .enumerate()
                    .map(|(i, l)| format!("{}. {l}", i + 1))
                    .collect::<Vec<_>>()
                    .join("\n"),
            );
        }
        if prompt.starts_with(GOAL_MARKER) {
            return Some(
                r#"[{"user_goal": "complete the activity", "confidence": 0.9, "explanation": "The listed actions are steps of one activity."}]"#
                    .to_string(),
            );
        }
        None
    }
}

impl LanguageModel for EchoSummarizer {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, "echo-summarizer")
    }

    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        _vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        Ok(limit_tokens(
            &Self::answer(prompt).unwrap_or_default(),
            max_new_tokens,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Perfect,
    /// The given (0-based) prediction call proposes the first
    /// partial-progress step again.
    RepeatOnce {
        call: usize,
    },
}

pub struct OracleLlm {
    script: ActivityScript,
    embedder: Arc<dyn Embedder>,
    mode: OracleMode,
    threshold: f64,
    calls: AtomicUsize,
}

impl OracleLlm {
    pub fn new(script: ActivityScript, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            script,
            embedder,
            mode: OracleMode::Perfect,
            threshold: DEFAULT_MATCH_THRESHOLD,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_mode(mut self, mode: OracleMode) -> Self {
        self.mode = mode;
        self
    }

    fn done_steps(&self, history: &[String]) -> Result<HashSet<String>, ProviderError> {
        let mut done = HashSet::new();
        for line in history {
            if let Some(m) =
                match_to_step(line, &self.script, self.embedder.as_ref(), self.threshold)?
            {
                done.insert(m.step_id);
            }
        }
        Ok(done)
    }

    fn plan(&self, prompt: &str) -> Result<String, ProviderError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let history = query_history(prompt);
        let z = horizon(prompt);
        let mut done = self.done_steps(&history)?;
        let start = history.len() + 1;
        let required: HashSet<&str> = self.script.required_step_ids().into_iter().collect();
        let mut items = Vec::new();
        if self.mode == (OracleMode::RepeatOnce { call }) {
            items.push(self.script.steps[0].description.clone());
        }
        while items.len() < z {
            let next = self.script.topological_order().into_iter().find(|id| {
                required.contains(id)
                    && !done.contains(*id)
                    && self.script.precedence_satisfied(id, &done)
            });
            match next {
                Some(id) => {
                    items.push(
                        self.script
                            .step(id)
                            .expect("known step")
                            .description
                            .clone(),
                    );
                    done.insert(id.to_string());
                }
                None => break,
            }
        }
        if items.is_empty() {
            items.push(SERVE_INSTRUCTION.to_string());
        }
        // Multi-step requests are filled up by cycling the plan.
        let planned = items.len();
        let mut i = 0;
        while items.len() < z {
            items.push(items[i % planned].clone());
            i += 1;
        }
        Ok(items
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{}. {t}", start + i))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

impl LanguageModel for OracleLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, "script-oracle")
    }

    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        _vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        let text = match EchoSummarizer::answer(prompt) {
            Some(t) => t,
            None => self.plan(prompt)?,
        };
        Ok(limit_tokens(&text, max_new_tokens))
    }
}

/// Which assistant drives a simulated session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssistantSpec {
    Oracle,
    /// Oracle that proposes an already completed step once, on its second
    /// prediction.
    RepeatOnce,
    /// Always proposes the first partial-progress step.
    Stuck,
    /// A stub file: `{"items": [...]}` for a fixed sequence or a fixture
    /// table `{"entries": [...], "default": "..."}`.
    Stub(String),
    /// Remote completion endpoint.
    Remote(String),
}

impl std::str::FromStr for AssistantSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "repeat-once" => Ok(Self::RepeatOnce),
            "stuck" => Ok(Self::Stuck),
            _ => {
                if let Some(p) = s.strip_prefix("stub:") {
                    Ok(Self::Stub(p.to_string()))
                } else if let Some(u) = s.strip_prefix("remote:") {
                    Ok(Self::Remote(u.to_string()))
                } else {
                    Err(format!(
                        "unknown assistant `{s}` (expected oracle, repeat-once, stuck, stub:FILE or remote:URL)"
                    ))
                }
            }
        }
    }
}

impl std::fmt::Display for AssistantSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Oracle => write!(f, "oracle"),
            Self::RepeatOnce => write!(f, "repeat-once"),
            Self::Stuck => write!(f, "stuck"),
            Self::Stub(p) => write!(f, "stub:{p}"),
            Self::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StubFile {
    Sequence { items: Vec<String> },
    Fixture(FixtureTable),
}

pub fn load_stub(path: impl AsRef<Path>) -> Result<Arc<dyn LanguageModel>, ProviderError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ProviderError::Argument(format!("stub file {}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("stub");
    match serde_json::from_str::<StubFile>(&raw) {
        Ok(StubFile::Sequence { items }) if !items.is_empty() => {
            Ok(Arc::new(SequenceLlm::new(name, items)))
        }
        Ok(StubFile::Sequence { .. }) => {
            Err(ProviderError::Argument("stub sequence is empty".into()))
        }
        Ok(StubFile::Fixture(t)) => Ok(Arc::new(FixtureLlm::new(name, t))),
        Err(e) => Err(ProviderError::Argument(format!(
            "stub file {}: {e}",
            path.display()
        ))),
    }
}

/// Planner and summariser.
pub type ModelPair = (Arc<dyn LanguageModel>, Arc<dyn LanguageModel>);

/// Planner and summariser models for one simulated session.
pub fn assistant_models(
    spec: &AssistantSpec,
    script: &ActivityScript,
    embedder: Arc<dyn Embedder>,
) -> Result<ModelPair, ProviderError> {
    let echo: Arc<dyn LanguageModel> = Arc::new(EchoSummarizer);
    Ok(match spec {
        AssistantSpec::Oracle => (Arc::new(OracleLlm::new(script.clone(), embedder)), echo),
        AssistantSpec::RepeatOnce => (
            Arc::new(
                OracleLlm::new(script.clone(), embedder)
                    .with_mode(OracleMode::RepeatOnce { call: 1 }),
            ),
            echo,
        ),
        AssistantSpec::Stuck => (
            Arc::new(SequenceLlm::new(
                "stuck",
                vec![script.steps[0].description.clone()],
            )),
            echo,
        ),
        AssistantSpec::Stub(path) => (load_stub(path)?, echo),
        AssistantSpec::Remote(url) => {
            let llm: Arc<dyn LanguageModel> =
                Arc::new(HttpLlm::new(HttpEndpoint::new("remote", url)));
            (llm.clone(), llm)
        }
    })
}
