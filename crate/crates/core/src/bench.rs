//! Offline benchmark runners: anticipation, planning and the single-shot
//! rerun of recorded study sessions.
//!
//! Samples run concurrently on a bounded worker pool; the report is a fold
//! over sample ids, so the worker count never changes the result. Every
//! evaluated sample is logged with its prompt, completion and labels so the
//! metrics can be recomputed without calling a model again.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::validate_sample;
use crate::metrics::{aggregate, MetricError, MetricReport, SampleMetrics};
use crate::pipelines::{PipelineError, Predictor, PredictorConfig, PredictorKind};
use crate::script::ActivityScript;
use crate::session::matching::{
    detect_done, match_to_step, DEFAULT_DONE_THRESHOLD, DEFAULT_MATCH_THRESHOLD,
};
use crate::session::report::step_set_iou;
use crate::session::StudySession;
use crate::types::{ActionSequence, BenchmarkSample, Task, VisualHistory};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no sample could be evaluated ({skipped} skipped)")]
    NothingEvaluated { skipped: usize },
    #[error("unsupported horizon {z} for {task}")]
    Horizon { task: &'static str, z: usize },
    #[error("unknown script `{0}`")]
    UnknownScript(String),
    #[error("every sample failed with a provider error; first: {0}")]
    Provider(String),
    #[error("worker pool: {0}")]
    Workers(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("run directory io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// When set, prompts, predictions and reports are written here.
    pub run_dir: Option<PathBuf>,
    /// Row label for the text table.
    pub label: String,
}

impl BenchOptions {
    pub fn with_label(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Self::default()
        }
    }
}

/// Everything recorded about one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLog {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(default)]
    pub raw_sentences: Vec<String>,
    /// Closed-set prediction, exactly `Z` labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ActionSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<ActionSequence>,
    /// Step ids matched for rerun predictions, aligned with `raw_sentences`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matched_steps: Vec<Option<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<SampleMetrics>,
    #[serde(default)]
    pub failed_parse: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleLog {
    fn skipped(sample_id: &str, reason: String) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            prompt: None,
            completion: None,
            raw_sentences: Vec::new(),
            predicted: None,
            gt: None,
            matched_steps: Vec::new(),
            metrics: None,
            failed_parse: false,
            skipped: Some(reason),
            error: None,
        }
    }

    fn errored(sample_id: &str, error: String) -> Self {
        Self {
            skipped: None,
            error: Some(error),
            ..Self::skipped(sample_id, String::new())
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: MetricReport,
    /// One entry per input sample, in sample-id order.
    pub logs: Vec<SampleLog>,
    /// Samples that failed with a provider error.
    pub provider_errors: usize,
}

impl BenchOutcome {
    pub fn table(&self, label: &str) -> String {
        self.report.render_table(label)
    }
}

fn on_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Workers(e.to_string()))?;
    Ok(pool.install(f))
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `prompts/<id>.txt`, `predictions/predictions.jsonl` and
/// `reports/{report.json,table.txt}` under `dir`.
pub fn write_run(dir: &Path, outcome: &BenchOutcome, label: &str) -> std::io::Result<()> {
    for sub in ["prompts", "predictions", "reports", "events"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    for log in &outcome.logs {
        if let Some(p) = &log.prompt {
            std::fs::write(
                dir.join("prompts")
                    .join(format!("{}.txt", file_stem(&log.sample_id))),
                p,
            )?;
        }
    }
    let mut jsonl = String::new();
    for log in &outcome.logs {
        jsonl.push_str(&serde_json::to_string(log).map_err(std::io::Error::other)?);
        jsonl.push('\n');
    }
    std::fs::write(dir.join("predictions").join("predictions.jsonl"), jsonl)?;
    std::fs::write(
        dir.join("reports").join("report.json"),
        outcome.report.to_json_pretty(),
    )?;
    std::fs::write(dir.join("reports").join("table.txt"), outcome.table(label))?;
    Ok(())
}

/// Reads back the per-sample log of a run directory.
pub fn read_predictions(dir: &Path) -> std::io::Result<Vec<SampleLog>> {
    let text = std::fs::read_to_string(dir.join("predictions").join("predictions.jsonl"))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

fn finish(
    mut logs: Vec<SampleLog>,
    z: usize,
    opts: &BenchOptions,
) -> Result<BenchOutcome, BenchError> {
    logs.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let evaluated: Vec<(String, SampleMetrics)> = logs
        .iter()
        .filter_map(|l| l.metrics.clone().map(|m| (l.sample_id.clone(), m)))
        .collect();
    let skipped = logs.len() - evaluated.len();
    if evaluated.is_empty() {
        if let Some(e) = logs.iter().find_map(|l| l.error.clone()) {
            return Err(BenchError::Provider(e));
        }
        return Err(BenchError::NothingEvaluated { skipped });
    }
    let mut report = aggregate(evaluated, z)?;
    report.counts.skipped = skipped;
    let failed: Vec<&str> = logs
        .iter()
        .filter(|l| l.failed_parse)
        .map(|l| l.sample_id.as_str())
        .collect();
    if !failed.is_empty() {
        report
            .flags
            .push(format!("unparsed completions: {}", failed.join(", ")));
    }
    let provider_errors = logs.iter().filter(|l| l.error.is_some()).count();
    if provider_errors > 0 {
        report
            .flags
            .push(format!("provider errors: {provider_errors}"));
    }
    let outcome = BenchOutcome {
        report,
        logs,
        provider_errors,
    };
    if let Some(dir) = &opts.run_dir {
        write_run(dir, &outcome, &opts.label)?;
    }
    Ok(outcome)
}

type Scorer = fn(&ActionSequence, &ActionSequence, usize) -> Result<SampleMetrics, MetricError>;

fn run_samples(
    samples: &[BenchmarkSample],
    predictor: &Predictor,
    z: usize,
    score: Scorer,
    opts: &BenchOptions,
) -> Result<BenchOutcome, BenchError> {
    if samples.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let needs_text = predictor.uses_text_history();
    let logs = on_pool(opts.workers, || {
        samples
            .par_iter()
            .map(|s| -> Result<SampleLog, BenchError> {
                if let Err(e) = validate_sample(s, z) {
                    return Ok(SampleLog::skipped(&s.sample_id, e.to_string()));
                }
                if needs_text && s.history.narrations.is_empty() {
                    return Ok(SampleLog::skipped(
                        &s.sample_id,
                        "history has no narrations".into(),
                    ));
                }
                let p = match predictor.predict_z(&s.history, z) {
                    Ok(p) => p,
                    Err(e) if e.is_provider() => {
                        return Ok(SampleLog::errored(&s.sample_id, e.to_string()))
                    }
                    Err(PipelineError::MissingGoal) => {
                        return Ok(SampleLog::skipped(
                            &s.sample_id,
                            PipelineError::MissingGoal.to_string(),
                        ))
                    }
                    Err(e) => return Err(e.into()),
                };
                let pred = p.mapped.clone().ok_or(PipelineError::MissingVocabulary)?;
                let gt = s.gt_future.truncated(z);
                let metrics = score(&pred, &gt, z)?;
                Ok(SampleLog {
                    sample_id: s.sample_id.clone(),
                    prompt: Some(p.prompt.text),
                    completion: Some(p.completion),
                    raw_sentences: p.raw_sentences,
                    predicted: Some(pred),
                    gt: Some(gt),
                    matched_steps: Vec::new(),
                    metrics: Some(metrics),
                    failed_parse: p.failed,
                    skipped: None,
                    error: None,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    finish(logs, z, opts)
}

/// Long-horizon anticipation: verb, noun and action edit distance at `Z`.
pub fn run_lta(
    samples: &[BenchmarkSample],
    predictor: &Predictor,
    z: usize,
    opts: &BenchOptions,
) -> Result<BenchOutcome, BenchError> {
    if z == 0 {
        return Err(BenchError::Horizon { task: "lta", z });
    }
    run_samples(samples, predictor, z, SampleMetrics::anticipation, opts)
}

/// Goal-conditioned planning: mAcc at `Z = 1`, SR/mAcc/mIoU otherwise.
pub fn run_vpa(
    samples: &[BenchmarkSample],
    predictor: &Predictor,
    z: usize,
    opts: &BenchOptions,
) -> Result<BenchOutcome, BenchError> {
    if z == 0 {
        return Err(BenchError::Horizon { task: "vpa", z });
    }
    run_samples(samples, predictor, z, SampleMetrics::planning, opts)
}

/// Configuration for the single-shot rerun: goal-conditioned open-set
/// planning of `n + 2` steps.
pub fn rerun_config(kind: PredictorKind, script: &ActivityScript) -> PredictorConfig {
    PredictorConfig {
        open_set_output: true,
        goal_conditioning: true,
        ..PredictorConfig::of_kind(kind, Task::Vpa, script.n_eval + 2)
    }
}

/// Reruns each recorded session offline: one multi-step prediction of
/// `n + 2` steps from the partial-progress narrations and the goal, scored
/// by step-set IoU against the script's remaining steps. `predictor_for`
/// builds the predictor for a session's script; the session state is never
/// consulted.
pub fn offline_rerun(
    sessions: &[StudySession],
    scripts: &[ActivityScript],
    predictor_for: impl Fn(&StudySession, &ActivityScript) -> Result<Predictor, BenchError> + Sync,
    opts: &BenchOptions,
) -> Result<BenchOutcome, BenchError> {
    if sessions.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let by_id: BTreeMap<&str, &ActivityScript> =
        scripts.iter().map(|s| (s.script_id.as_str(), s)).collect();
    let logs = on_pool(opts.workers, || {
        sessions
            .par_iter()
            .map(|s| -> Result<SampleLog, BenchError> {
                let id = &s.report.session_id;
                let script = *by_id
                    .get(s.report.script_id.as_str())
                    .ok_or_else(|| BenchError::UnknownScript(s.report.script_id.clone()))?;
                if s.partial_progress.is_empty() {
                    return Ok(SampleLog::skipped(
                        id,
                        "no partial-progress narrations".into(),
                    ));
                }
                let predictor = predictor_for(s, script)?;
                let history = VisualHistory::from_narrations(s.partial_progress.clone())
                    .with_goal(s.goal.clone());
                let p = match predictor.predict_z(&history, script.n_eval + 2) {
                    Ok(p) => p,
                    Err(e) if e.is_provider() => return Ok(SampleLog::errored(id, e.to_string())),
                    Err(e) => return Err(e.into()),
                };
                let embedder = predictor.providers().embedder.as_ref();
                let provider = |e: crate::providers::ProviderError| PipelineError::Provider(e);
                let mut matched = Vec::with_capacity(p.raw_sentences.len());
                let mut pairs = Vec::new();
                for raw in &p.raw_sentences {
                    if detect_done(raw, embedder, DEFAULT_DONE_THRESHOLD).map_err(provider)? {
                        matched.push(None);
                        continue;
                    }
                    let m = match_to_step(raw, script, embedder, DEFAULT_MATCH_THRESHOLD)
                        .map_err(provider)?
                        .map(|m| m.step_id);
                    matched.push(m.clone());
                    pairs.push((m, raw.clone()));
                }
                let iou = step_set_iou(&pairs, script);
                Ok(SampleLog {
                    sample_id: id.clone(),
                    prompt: Some(p.prompt.text),
                    completion: Some(p.completion),
                    raw_sentences: p.raw_sentences,
                    predicted: None,
                    gt: None,
                    matched_steps: matched,
                    metrics: Some(SampleMetrics::iou_only(iou)),
                    failed_parse: p.failed,
                    skipped: None,
                    error: None,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    finish(logs, 0, opts)
}

/// Online session reports in the same schema as an offline rerun.
pub fn online_report(sessions: &[StudySession]) -> Result<MetricReport, BenchError> {
    if sessions.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    Ok(aggregate(
        sessions.iter().map(|s| {
            (
                s.report.session_id.clone(),
                SampleMetrics::iou_only(s.report.online_miou),
            )
        }),
        0,
    )?)
}
