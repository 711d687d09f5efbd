//! Run configuration: provider selection, predictor and stream settings,
//! service settings, loaded from TOML with environment overrides.
//!
//! Provider specs are short strings:
//!
//! - language models: `oracle`, `repeat-once`, `stuck`, `stub:FILE`,
//!   `remote:URL`, `prose`, `echo`, `random:SEED[:LINES]`;
//! - embedders: `bag-of-words`, `synonyms:FILE`, `remote:URL`;
//! - narrators: `ground-truth:FILE`, `remote:URL`;
//! - vision encoders: `stub`, `unavailable`, `remote:URL`;
//! - tokenizers: `word`, `heuristic`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::StreamConfig;
use crate::pipelines::PredictorKind;
use crate::providers::http::{
    HttpEmbedder, HttpEndpoint, HttpLlm, HttpNarrator, HttpVisionEncoder,
};
use crate::providers::stub::{
    AnnotatedInterval, BagOfWordsEmbedder, CachedEmbedder, CannedLlm, GroundTruthNarrator,
    RandomLlm, StubVisionEncoder, SynonymEmbedder, SynonymTable, UnavailableVisionEncoder,
};
use crate::providers::{
    Embedder, HeuristicTokenizer, LanguageModel, Narrator, ProviderError, Providers, Tokenizer,
    VisionEncoder, WordTokenizer,
};
use crate::script::ActivityScript;
use crate::session::assistants::{assistant_models, load_stub, AssistantSpec, EchoSummarizer};
use crate::session::matching::{DEFAULT_DONE_THRESHOLD, DEFAULT_MATCH_THRESHOLD};
use crate::session::SessionConfig;
use crate::vocab::Vocabulary;

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "EGOASSIST_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
    #[error("invalid {field} spec `{value}`: {message}")]
    Spec {
        field: &'static str,
        value: String,
        message: String,
    },
    #[error("`{0}` needs an activity script")]
    NeedsScript(String),
    #[error("`{0}` needs a vocabulary")]
    NeedsVocabulary(String),
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// A language-model spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmSpec {
    Assistant(AssistantSpec),
    Prose,
    Echo,
    Random { seed: u64, lines: usize },
}

impl std::str::FromStr for LlmSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prose" => Ok(Self::Prose),
            "echo" => Ok(Self::Echo),
            _ => {
                if let Some(rest) = s.strip_prefix("random:") {
                    let mut parts = rest.splitn(2, ':');
                    let seed = parts
                        .next()
                        .unwrap_or_default()
                        .parse()
                        .map_err(|_| format!("bad seed in `{s}`"))?;
                    let lines = match parts.next() {
                        Some(l) => l.parse().map_err(|_| format!("bad line count in `{s}`"))?,
                        None => 20,
                    };
                    Ok(Self::Random { seed, lines })
                } else {
                    s.parse::<AssistantSpec>().map(Self::Assistant).map_err(|_| {
                        format!("unknown language model `{s}` (expected oracle, repeat-once, stuck, stub:FILE, remote:URL, prose, echo or random:SEED)")
                    })
                }
            }
        }
    }
}

impl std::fmt::Display for LlmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Assistant(a) => write!(f, "{a}"),
            Self::Prose => write!(f, "prose"),
            Self::Echo => write!(f, "echo"),
            Self::Random { seed, lines } => write!(f, "random:{seed}:{lines}"),
        }
    }
}

impl LlmSpec {
    pub fn needs_script(&self) -> bool {
        matches!(
            self,
            Self::Assistant(
                AssistantSpec::Oracle | AssistantSpec::RepeatOnce | AssistantSpec::Stuck
            )
        )
    }
}

fn default_llm() -> String {
    "oracle".into()
}
fn default_embedder() -> String {
    "bag-of-words".into()
}
fn default_tokenizer() -> String {
    "word".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default = "default_llm")]
    pub llm: String,
    #[serde(default = "default_embedder")]
    pub embedder: String,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: String,
    #[serde(default)]
    pub narrator: Option<String>,
    #[serde(default)]
    pub vision: Option<String>,
    /// Model for history summarisation; defaults to the assistant's own
    /// summariser, or to `llm`.
    #[serde(default)]
    pub summary_llm: Option<String>,
    /// Model for goal generation; defaults like `summary_llm`.
    #[serde(default)]
    pub goal_llm: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            llm: default_llm(),
            embedder: default_embedder(),
            tokenizer: default_tokenizer(),
            narrator: None,
            vision: None,
            summary_llm: None,
            goal_llm: None,
        }
    }
}

fn spec_err(field: &'static str, value: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Spec {
        field,
        value: value.to_string(),
        message: message.into(),
    }
}

fn parse_llm(field: &'static str, value: &str) -> Result<LlmSpec, ConfigError> {
    value.parse().map_err(|m: String| spec_err(field, value, m))
}

/// What provider construction may need besides the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildContext<'a> {
    pub script: Option<&'a ActivityScript>,
    pub vocabulary: Option<&'a Vocabulary>,
    /// Attach a vision encoder even when `vision` is unset (VCLM runs).
    pub want_vision: bool,
}

type Models = (Arc<dyn LanguageModel>, Option<Arc<dyn LanguageModel>>);

fn build_llm(
    spec: &LlmSpec,
    ctx: &BuildContext<'_>,
    embedder: Arc<dyn Embedder>,
) -> Result<Models, ConfigError> {
    Ok(match spec {
        LlmSpec::Prose => (Arc::new(CannedLlm::prose()), None),
        LlmSpec::Echo => (Arc::new(EchoSummarizer), None),
        LlmSpec::Random { seed, lines } => {
            let vocab = ctx
                .vocabulary
                .ok_or_else(|| ConfigError::NeedsVocabulary(spec.to_string()))?;
            (Arc::new(RandomLlm::new(vocab, *lines, *seed)), None)
        }
        LlmSpec::Assistant(AssistantSpec::Stub(path)) => {
            (load_stub(path)?, Some(Arc::new(EchoSummarizer)))
        }
        LlmSpec::Assistant(AssistantSpec::Remote(url)) => (
            Arc::new(HttpLlm::new(HttpEndpoint::new("remote", url))),
            None,
        ),
        LlmSpec::Assistant(a) => {
            let script = ctx
                .script
                .ok_or_else(|| ConfigError::NeedsScript(spec.to_string()))?;
            let (planner, summarizer) = assistant_models(a, script, embedder)?;
            (planner, Some(summarizer))
        }
    })
}

fn remote(value: &str) -> Option<&str> {
    value.strip_prefix("remote:")
}

fn build_embedder(value: &str) -> Result<Arc<dyn Embedder>, ConfigError> {
    let inner: Arc<dyn Embedder> = if value == "bag-of-words" {
        Arc::new(BagOfWordsEmbedder::default())
    } else if let Some(path) = value.strip_prefix("synonyms:") {
        Arc::new(SynonymEmbedder::new(SynonymTable::load(path)?)?)
    } else if let Some(url) = remote(value) {
        Arc::new(HttpEmbedder::new(HttpEndpoint::new("embedder", url)))
    } else {
        return Err(spec_err(
            "embedder",
            value,
            "expected bag-of-words, synonyms:FILE or remote:URL",
        ));
    };
    Ok(Arc::new(CachedEmbedder::new(inner)))
}

fn build_tokenizer(value: &str) -> Result<Arc<dyn Tokenizer>, ConfigError> {
    match value {
        "word" => Ok(Arc::new(WordTokenizer)),
        "heuristic" => Ok(Arc::new(HeuristicTokenizer)),
        _ => Err(spec_err("tokenizer", value, "expected word or heuristic")),
    }
}

fn build_narrator(value: &str) -> Result<Arc<dyn Narrator>, ConfigError> {
    if let Some(path) = value.strip_prefix("ground-truth:") {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| spec_err("narrator", value, e.to_string()))?;
        let timeline: Vec<AnnotatedInterval> =
            serde_json::from_str(&raw).map_err(|e| spec_err("narrator", value, e.to_string()))?;
        Ok(Arc::new(GroundTruthNarrator::new(timeline)))
    } else if let Some(url) = remote(value) {
        Ok(Arc::new(HttpNarrator::new(HttpEndpoint::new(
            "narrator", url,
        ))))
    } else {
        Err(spec_err(
            "narrator",
            value,
            "expected ground-truth:FILE or remote:URL",
        ))
    }
}

fn build_vision(value: &str) -> Result<Arc<dyn VisionEncoder>, ConfigError> {
    match value {
        "stub" => Ok(Arc::new(StubVisionEncoder::default())),
        "unavailable" => Ok(Arc::new(UnavailableVisionEncoder)),
        _ => match remote(value) {
            Some(url) => Ok(Arc::new(HttpVisionEncoder::new(HttpEndpoint::new(
                "vision", url,
            )))),
            None => Err(spec_err(
                "vision",
                value,
                "expected stub, unavailable or remote:URL",
            )),
        },
    }
}

impl ProviderConfig {
    /// Parses every spec without touching files or the network.
    pub fn validate(&self) -> Result<(), ConfigError> {
        parse_llm("llm", &self.llm)?;
        for (field, v) in [
            ("summary_llm", &self.summary_llm),
            ("goal_llm", &self.goal_llm),
        ] {
            if let Some(v) = v {
                parse_llm(field, v)?;
            }
        }
        if !(self.embedder == "bag-of-words"
            || self.embedder.starts_with("synonyms:")
            || remote(&self.embedder).is_some())
        {
            return Err(spec_err(
                "embedder",
                &self.embedder,
                "expected bag-of-words, synonyms:FILE or remote:URL",
            ));
        }
        build_tokenizer(&self.tokenizer)?;
        if let Some(n) = &self.narrator {
            if !(n.starts_with("ground-truth:") || remote(n).is_some()) {
                return Err(spec_err(
                    "narrator",
                    n,
                    "expected ground-truth:FILE or remote:URL",
                ));
            }
        }
        if let Some(v) = &self.vision {
            if !(v == "stub" || v == "unavailable" || remote(v).is_some()) {
                return Err(spec_err(
                    "vision",
                    v,
                    "expected stub, unavailable or remote:URL",
                ));
            }
        }
        Ok(())
    }

    pub fn needs_script(&self) -> bool {
        [
            Some(&self.llm),
            self.summary_llm.as_ref(),
            self.goal_llm.as_ref(),
        ]
        .into_iter()
        .flatten()
        .any(|v| v.parse::<LlmSpec>().is_ok_and(|s| s.needs_script()))
    }

    pub fn build(&self, ctx: &BuildContext<'_>) -> Result<Providers, ConfigError> {
        let embedder = build_embedder(&self.embedder)?;
        let (llm, own_summarizer) =
            build_llm(&parse_llm("llm", &self.llm)?, ctx, embedder.clone())?;
        let mut p =
            Providers::new(llm, embedder.clone()).with_tokenizer(build_tokenizer(&self.tokenizer)?);
        let summary = match &self.summary_llm {
            Some(v) => Some(build_llm(&parse_llm("summary_llm", v)?, ctx, embedder.clone())?.0),
            None => own_summarizer.clone(),
        };
        if let Some(s) = summary {
            p = p.with_summary_llm(s);
        }
        let goal = match &self.goal_llm {
            Some(v) => Some(build_llm(&parse_llm("goal_llm", v)?, ctx, embedder)?.0),
            None => own_summarizer,
        };
        if let Some(g) = goal {
            p = p.with_goal_llm(g);
        }
        if let Some(n) = &self.narrator {
            p = p.with_narrator(build_narrator(n)?);
        }
        match &self.vision {
            Some(v) => p = p.with_vision(build_vision(v)?),
            None if ctx.want_vision => p = p.with_vision(Arc::new(StubVisionEncoder::default())),
            None => {}
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSettings {
    #[serde(default = "default_match")]
    pub match_threshold: f64,
    #[serde(default = "default_done")]
    pub done_threshold: f64,
}

fn default_match() -> f64 {
    DEFAULT_MATCH_THRESHOLD
}
fn default_done() -> f64 {
    DEFAULT_DONE_THRESHOLD
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            match_threshold: default_match(),
            done_threshold: default_done(),
        }
    }
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}
fn default_run_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSettings {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Extra scripts (`*.json`) on top of the bundled ones.
    #[serde(default)]
    pub scripts_dir: Option<PathBuf>,
    #[serde(default = "default_run_dir")]
    pub run_dir: PathBuf,
    /// Static bearer token; unset disables authentication.
    #[serde(default)]
    pub api_token: Option<String>,
    /// Seconds clients should wait after a provider outage.
    #[serde(default = "default_retry_after")]
    pub retry_after_s: u64,
}

fn default_retry_after() -> u64 {
    5
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            scripts_dir: None,
            run_dir: default_run_dir(),
            api_token: None,
            retry_after_s: default_retry_after(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub providers: ProviderConfig,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub session: SessionSettings,
    #[serde(default)]
    pub service: ServiceSettings,
    /// In-context example pool (JSONL of examples).
    #[serde(default)]
    pub examples: Option<PathBuf>,
    /// Closed-set vocabulary file.
    #[serde(default)]
    pub vocabulary: Option<PathBuf>,
    /// Benchmark worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

/// `(variable, meaning)` for every recognised override.
pub const ENV_OVERRIDES: [(&str, &str); 8] = [
    ("EGOASSIST_LLM", "providers.llm"),
    ("EGOASSIST_EMBEDDER", "providers.embedder"),
    ("EGOASSIST_VISION", "providers.vision"),
    ("EGOASSIST_BIND", "service.bind"),
    ("EGOASSIST_SCRIPTS_DIR", "service.scripts_dir"),
    ("EGOASSIST_RUN_DIR", "service.run_dir"),
    ("EGOASSIST_API_TOKEN", "service.api_token"),
    ("EGOASSIST_WORKERS", "workers"),
];

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::File {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.providers.validate()?;
        self.stream.validate().map_err(|e| ConfigError::File {
            path: "stream".into(),
            message: e.to_string(),
        })
    }

    /// Applies [`ENV_OVERRIDES`] read through `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |n: &str| var(n).filter(|v| !v.is_empty());
        if let Some(v) = get("EGOASSIST_LLM") {
            self.providers.llm = v;
        }
        if let Some(v) = get("EGOASSIST_EMBEDDER") {
            self.providers.embedder = v;
        }
        if let Some(v) = get("EGOASSIST_VISION") {
            self.providers.vision = Some(v);
        }
        if let Some(v) = get("EGOASSIST_BIND") {
            self.service.bind = v;
        }
        if let Some(v) = get("EGOASSIST_SCRIPTS_DIR") {
            self.service.scripts_dir = Some(v.into());
        }
        if let Some(v) = get("EGOASSIST_RUN_DIR") {
            self.service.run_dir = v.into();
        }
        if let Some(v) = get("EGOASSIST_API_TOKEN") {
            self.service.api_token = Some(v);
        }
        if let Some(v) = get("EGOASSIST_WORKERS") {
            self.workers = v.parse().map_err(|_| ConfigError::Env {
                name: "EGOASSIST_WORKERS".into(),
                message: format!("`{v}` is not a worker count"),
            })?;
        }
        self.validate()
    }

    /// Online session settings for a predictor kind.
    pub fn session_config(&self, kind: PredictorKind) -> SessionConfig {
        SessionConfig {
            stream: self.stream.clone(),
            match_threshold: self.session.match_threshold,
            done_threshold: self.session.done_threshold,
            ..SessionConfig::new(kind)
        }
    }

    /// Providers for a live session on `script`.
    pub fn session_providers(
        &self,
        script: &ActivityScript,
        kind: PredictorKind,
    ) -> Result<Providers, ConfigError> {
        self.providers.build(&BuildContext {
            script: Some(script),
            vocabulary: None,
            want_vision: kind == PredictorKind::Vclm,
        })
    }

    /// Loads `path` (or the file named by [`CONFIG_ENV`], or defaults) and
    /// applies process environment overrides.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ConfigError> {
        let from_env = std::env::var(CONFIG_ENV)
            .ok()
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        let mut cfg = match path.map(Path::to_path_buf).or(from_env) {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|n| std::env::var(n).ok())?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::script::bundled_script;

    #[test]
    fn llm_specs_round_trip() {
        for s in [
            "oracle",
            "repeat-once",
            "stuck",
            "stub:a.json",
            "remote:http://x",
            "prose",
            "echo",
            "random:7:5",
        ] {
            assert_eq!(s.parse::<LlmSpec>().unwrap().to_string(), s);
        }
        assert_eq!(
            "random:3".parse::<LlmSpec>().unwrap(),
            LlmSpec::Random { seed: 3, lines: 20 }
        );
        assert!("gpt".parse::<LlmSpec>().is_err());
    }

    #[test]
    fn toml_defaults_and_unknown_fields() {
        let cfg = RunConfig::parse("", "inline").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg = RunConfig::parse(
            "[providers]\nllm = \"prose\"\n[stream]\ncluster_threshold = 0.5\n",
            "inline",
        )
        .unwrap();
        assert_eq!(cfg.providers.llm, "prose");
        assert_eq!(cfg.stream.cluster_threshold, 0.5);
        assert!(matches!(
            RunConfig::parse("[providers]\nmodel = \"x\"\n", "inline"),
            Err(ConfigError::File { .. })
        ));
        assert!(matches!(
            RunConfig::parse("[providers]\nembedder = \"word2vec\"\n", "inline"),
            Err(ConfigError::Spec {
                field: "embedder",
                ..
            })
        ));
    }

    #[test]
    fn env_overrides_win() {
        let env: HashMap<&str, &str> = [
            ("EGOASSIST_LLM", "echo"),
            ("EGOASSIST_WORKERS", "3"),
            ("EGOASSIST_BIND", ""),
        ]
        .into();
        let mut cfg = RunConfig::default();
        cfg.apply_env(|n| env.get(n).map(|v| v.to_string()))
            .unwrap();
        assert_eq!(cfg.providers.llm, "echo");
        assert_eq!(cfg.workers, 3);
        assert_eq!(cfg.service.bind, default_bind());
        let bad: HashMap<&str, &str> = [("EGOASSIST_WORKERS", "many")].into();
        assert!(matches!(
            RunConfig::default().apply_env(|n| bad.get(n).map(|v| v.to_string())),
            Err(ConfigError::Env { .. })
        ));
    }

    #[test]
    fn building_requires_context_where_needed() {
        let cfg = ProviderConfig::default();
        assert!(cfg.needs_script());
        assert!(matches!(
            cfg.build(&BuildContext::default()),
            Err(ConfigError::NeedsScript(_))
        ));
        let script = bundled_script("latte").unwrap();
        let p = cfg
            .build(&BuildContext {
                script: Some(&script),
                want_vision: true,
                ..BuildContext::default()
            })
            .unwrap();
        assert!(p.vision.is_some());
        assert_eq!(p.llm.descriptor().name, "script-oracle");
        let random = ProviderConfig {
            llm: "random:1".into(),
            ..ProviderConfig::default()
        };
        assert!(matches!(
            random.build(&BuildContext::default()),
            Err(ConfigError::NeedsVocabulary(_))
        ));
    }
}
