//! Benchmark jobs described as data, built against a [`RunConfig`]. The
//! command line and the service both run benchmarks through here.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{
    offline_rerun, rerun_config, run_lta, run_vpa, BenchError, BenchOptions, BenchOutcome,
};
use crate::config::{BuildContext, ConfigError, RunConfig};
use crate::dataset::{expand_videos, load_samples, load_videos, DatasetError};
use crate::pipelines::{Predictor, PredictorConfig, PredictorKind};
use crate::prompting::{ExamplePool, PromptError};
use crate::providers::Embedder;
use crate::script::{script_catalog, ActivityScript, ScriptError};
use crate::session::{SessionReport, StudySession};
use crate::synthetic;
use crate::types::{BenchmarkSample, Task};
use crate::vocab::{load_vocabulary, VocabError, Vocabulary};

pub const DEFAULT_LTA_Z: usize = 20;
pub const DEFAULT_VPA_Z: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchKind {
    Lta,
    Vpa,
    Rerun,
}

impl std::str::FromStr for BenchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lta" => Ok(Self::Lta),
            "vpa" => Ok(Self::Vpa),
            "rerun" => Ok(Self::Rerun),
            other => Err(format!(
                "unknown benchmark `{other}` (expected lta, vpa or rerun)"
            )),
        }
    }
}

impl std::fmt::Display for BenchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lta => "lta",
            Self::Vpa => "vpa",
            Self::Rerun => "rerun",
        })
    }
}

fn socratic() -> PredictorKind {
    PredictorKind::Socratic
}
fn yes() -> bool {
    true
}

/// Inputs of one benchmark run. Samples come from `samples`, `dataset`
/// (JSONL samples) or `videos` (JSONL annotated videos, expanded at `z`);
/// rerun sessions from `sessions` or `sessions_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRequest {
    #[serde(default = "socratic")]
    pub predictor: PredictorKind,
    #[serde(default)]
    pub z: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<BenchmarkSample>,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub videos: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sessions: Vec<StudySession>,
    #[serde(default)]
    pub sessions_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub goal_conditioning: bool,
    #[serde(default = "yes")]
    pub use_text_history: bool,
    #[serde(default)]
    pub num_examples: Option<usize>,
    #[serde(default)]
    pub label: Option<String>,
}

impl Default for BenchRequest {
    fn default() -> Self {
        Self {
            predictor: socratic(),
            z: None,
            samples: Vec::new(),
            dataset: None,
            videos: None,
            sessions: Vec::new(),
            sessions_dir: None,
            goal_conditioning: true,
            use_text_history: true,
            num_examples: None,
            label: None,
        }
    }
}

impl BenchRequest {
    pub fn horizon(&self, kind: BenchKind) -> usize {
        self.z.unwrap_or(match kind {
            BenchKind::Lta => DEFAULT_LTA_Z,
            BenchKind::Vpa | BenchKind::Rerun => DEFAULT_VPA_Z,
        })
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.predictor.label().to_string())
    }
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid request: {0}")]
    Request(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Vocabulary(#[from] VocabError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Examples(#[from] PromptError),
    #[error("session file {path}: {message}")]
    SessionFile { path: String, message: String },
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl JobError {
    /// Failures caused by an unreachable or failing model provider.
    pub fn is_provider(&self) -> bool {
        match self {
            Self::Bench(BenchError::Provider(_)) => true,
            Self::Bench(BenchError::Pipeline(e)) => e.is_provider(),
            Self::Config(ConfigError::Provider(_)) => true,
            _ => false,
        }
    }

    /// Failures caused by the request or configuration rather than the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Self::Request(_) | Self::Config(_))
    }
}

/// The configured closed-set vocabulary, or the synthetic one.
pub fn configured_vocabulary(cfg: &RunConfig) -> Result<Vocabulary, JobError> {
    Ok(match &cfg.vocabulary {
        Some(p) => load_vocabulary(p)?,
        None => synthetic::vocabulary(),
    })
}

fn example_pool(cfg: &RunConfig, embedder: &dyn Embedder) -> Result<Arc<ExamplePool>, JobError> {
    Ok(Arc::new(match &cfg.examples {
        Some(p) => ExamplePool::load(p, embedder)?,
        None => ExamplePool::empty(),
    }))
}

/// Scripts known to a run: bundled plus `service.scripts_dir`.
pub fn configured_scripts(cfg: &RunConfig) -> Result<Vec<ActivityScript>, JobError> {
    Ok(script_catalog(cfg.service.scripts_dir.as_deref())?)
}

/// A closed-set predictor for `task` built from the configured providers.
pub fn closed_set_predictor(
    cfg: &RunConfig,
    req: &BenchRequest,
    task: Task,
    z: usize,
) -> Result<Predictor, JobError> {
    let vocab = configured_vocabulary(cfg)?;
    let ctx = BuildContext {
        script: None,
        vocabulary: Some(&vocab),
        want_vision: req.predictor == PredictorKind::Vclm,
    };
    let providers = cfg.providers.build(&ctx)?;
    let pool = example_pool(cfg, providers.embedder.as_ref())?;
    let mut pcfg = PredictorConfig::of_kind(req.predictor, task, z);
    pcfg.goal_conditioning = task == Task::Vpa && req.goal_conditioning;
    pcfg.use_text_history = req.use_text_history;
    if let Some(n) = req.num_examples {
        pcfg.num_examples = n;
    }
    let predictor =
        Predictor::new(pcfg, providers, pool).map_err(|e| JobError::Request(e.to_string()))?;
    predictor
        .with_vocabulary(Arc::new(vocab))
        .map_err(|e| JobError::Bench(e.into()))
}

fn request_samples(req: &BenchRequest, z: usize) -> Result<Vec<BenchmarkSample>, JobError> {
    let sources = usize::from(!req.samples.is_empty())
        + usize::from(req.dataset.is_some())
        + usize::from(req.videos.is_some());
    if sources != 1 {
        return Err(JobError::Request(
            "give exactly one of samples, dataset or videos".into(),
        ));
    }
    if let Some(p) = &req.dataset {
        return Ok(load_samples(p)?);
    }
    if let Some(p) = &req.videos {
        return Ok(expand_videos(&load_videos(p)?, z));
    }
    Ok(req.samples.clone())
}

/// A stored session: a full study session or only its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SessionFile {
    Study(StudySession),
    Report(SessionReport),
}

impl SessionFile {
    pub fn report(&self) -> &SessionReport {
        match self {
            Self::Study(s) => &s.report,
            Self::Report(r) => r,
        }
    }
}

/// Every `*.json` session file in `dir`, sorted by file name.
pub fn load_session_files(dir: &Path) -> Result<Vec<SessionFile>, JobError> {
    let err = |path: &Path, message: String| JobError::SessionFile {
        path: path.display().to_string(),
        message,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| err(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let raw = std::fs::read_to_string(p).map_err(|e| err(p, e.to_string()))?;
            serde_json::from_str(&raw).map_err(|e| err(p, e.to_string()))
        })
        .collect()
}

/// Writes `<dir>/<session_id>.json`.
pub fn save_study_session(dir: &Path, session: &StudySession) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.json", session.report.session_id));
    let text = serde_json::to_string_pretty(session).map_err(std::io::Error::other)?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

fn request_sessions(req: &BenchRequest) -> Result<Vec<StudySession>, JobError> {
    match (&req.sessions_dir, req.sessions.is_empty()) {
        (Some(_), false) | (None, true) => Err(JobError::Request(
            "give exactly one of sessions or sessions_dir".into(),
        )),
        (None, false) => Ok(req.sessions.clone()),
        (Some(dir), true) => Ok(load_session_files(dir)?
            .into_iter()
            .filter_map(|f| match f {
                SessionFile::Study(s) => Some(s),
                SessionFile::Report(_) => None,
            })
            .collect()),
    }
}

/// Offline rerun of study sessions against the configured providers.
pub fn rerun_sessions(
    cfg: &RunConfig,
    kind: PredictorKind,
    sessions: &[StudySession],
    scripts: &[ActivityScript],
    opts: &BenchOptions,
) -> Result<BenchOutcome, JobError> {
    let pool = {
        let p = cfg.providers.build(&BuildContext {
            script: scripts.first(),
            ..BuildContext::default()
        })?;
        example_pool(cfg, p.embedder.as_ref())?
    };
    let outcome = offline_rerun(
        sessions,
        scripts,
        |_, script| {
            let ctx = BuildContext {
                script: Some(script),
                vocabulary: None,
                want_vision: kind == PredictorKind::Vclm,
            };
            let providers = cfg
                .providers
                .build(&ctx)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            Ok(Predictor::new(
                rerun_config(kind, script),
                providers,
                pool.clone(),
            )?)
        },
        opts,
    )?;
    Ok(outcome)
}

/// Runs one benchmark job end to end.
pub fn run_bench(
    kind: BenchKind,
    req: &BenchRequest,
    cfg: &RunConfig,
    run_dir: Option<PathBuf>,
) -> Result<BenchOutcome, JobError> {
    let opts = BenchOptions {
        workers: cfg.workers,
        run_dir,
        label: req.label(),
    };
    let z = req.horizon(kind);
    match kind {
        BenchKind::Lta => {
            let samples = request_samples(req, z)?;
            let p = closed_set_predictor(cfg, req, Task::Lta, z)?;
            Ok(run_lta(&samples, &p, z, &opts)?)
        }
        BenchKind::Vpa => {
            let samples = request_samples(req, z)?;
            let p = closed_set_predictor(cfg, req, Task::Vpa, z)?;
            Ok(run_vpa(&samples, &p, z, &opts)?)
        }
        BenchKind::Rerun => {
            let sessions = request_sessions(req)?;
            let scripts = configured_scripts(cfg)?;
            rerun_sessions(cfg, req.predictor, &sessions, &scripts, &opts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::stub::BagOfWordsEmbedder;
    use crate::script::bundled_script;
    use crate::session::assistants::AssistantSpec;
    use crate::session::simulate_with;

    #[test]
    fn request_defaults_and_sources() {
        let req: BenchRequest = serde_json::from_str("{}").unwrap();
        assert_eq!(req, BenchRequest::default());
        assert_eq!(req.horizon(BenchKind::Lta), 20);
        assert_eq!(req.horizon(BenchKind::Vpa), 3);
        assert!(serde_json::from_str::<BenchRequest>(r#"{"zz": 1}"#).is_err());
        let cfg = RunConfig::default();
        let err = run_bench(BenchKind::Lta, &req, &cfg, None).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn lta_job_with_random_model() {
        let cfg = RunConfig::parse("[providers]\nllm = \"random:3:20\"\n", "inline").unwrap();
        let req = BenchRequest {
            samples: synthetic::lta_samples(5, 20, 1),
            ..BenchRequest::default()
        };
        let out = run_bench(BenchKind::Lta, &req, &cfg, None).unwrap();
        assert_eq!(out.report.counts.evaluated, 5);
    }

    #[test]
    fn rerun_job_from_session_dir() {
        let dir = tempfile::tempdir().unwrap();
        let script = bundled_script("caprese").unwrap();
        let sim = simulate_with(
            "s1",
            &script,
            &AssistantSpec::RepeatOnce,
            PredictorKind::Socratic,
            Arc::new(BagOfWordsEmbedder::default()),
        )
        .unwrap();
        save_study_session(dir.path(), &sim.study).unwrap();
        std::fs::write(dir.path().join("bare.json"), sim.report.to_json_pretty()).unwrap();
        let files = load_session_files(dir.path()).unwrap();
        assert!(matches!(files[0], SessionFile::Report(_)));
        assert!(matches!(files[1], SessionFile::Study(_)));
        let req = BenchRequest {
            sessions_dir: Some(dir.path().to_path_buf()),
            ..BenchRequest::default()
        };
        let out = run_bench(BenchKind::Rerun, &req, &RunConfig::default(), None).unwrap();
        assert_eq!(out.report.per_sample["s1"].miou, Some(1.0));
    }
}
