//! Benchmark datasets as JSONL (one [`BenchmarkSample`] per line, narrations
//! inline) and expansion of step-annotated videos into planning samples.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    ActionLabel, ActionSequence, BenchmarkSample, Narration, NarrationSource, Span, Task,
    VideoSegment, VisualHistory,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sample `{sample_id}`: {message}")]
    Invalid { sample_id: String, message: String },
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(reader: impl BufRead) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatasetError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<BenchmarkSample>, DatasetError> {
    read_jsonl(BufReader::new(std::fs::File::open(path)?))
}

pub fn write_samples(
    samples: &[BenchmarkSample],
    path: impl AsRef<Path>,
) -> Result<(), DatasetError> {
    write_jsonl(samples, path.as_ref())
}

/// Checks the invariants a runner relies on for horizon `z`.
pub fn validate_sample(sample: &BenchmarkSample, z: usize) -> Result<(), DatasetError> {
    let invalid = |message: String| DatasetError::Invalid {
        sample_id: sample.sample_id.clone(),
        message,
    };
    sample
        .history
        .validate()
        .map_err(|e| invalid(e.to_string()))?;
    if sample.gt_future.len() < z {
        return Err(invalid(format!(
            "ground truth has {} actions, horizon {z} requested",
            sample.gt_future.len()
        )));
    }
    if sample.task == Task::Vpa && sample.history.goal.is_none() {
        return Err(invalid("planning sample without a goal".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedStep {
    pub label: ActionLabel,
    /// Text used for the history line (a predicted action or narration).
    pub narration: String,
    pub span: Span,
}

/// A step-annotated instructional video with its task title as goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedVideo {
    pub video_id: String,
    pub goal: String,
    pub steps: Vec<AnnotatedStep>,
}

pub fn load_videos(path: impl AsRef<Path>) -> Result<Vec<AnnotatedVideo>, DatasetError> {
    read_jsonl(BufReader::new(std::fs::File::open(path)?))
}

pub fn write_videos(videos: &[AnnotatedVideo], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    write_jsonl(videos, path.as_ref())
}

/// A video with `K` steps yields `K - Z` samples: sample `t` (1-based) sees
/// the first `t` steps and must predict the next `Z`.
pub fn expand_video(video: &AnnotatedVideo, z: usize) -> Vec<BenchmarkSample> {
    let k = video.steps.len();
    if z == 0 || k <= z {
        return Vec::new();
    }
    (1..=k - z)
        .map(|t| {
            let seen = &video.steps[..t];
            let narrations = seen
                .iter()
                .map(|s| {
                    Narration::new(s.narration.clone(), s.span, NarrationSource::GroundTruth)
                        .expect("annotated narrations are non-empty")
                })
                .collect();
            let segments = seen
                .iter()
                .map(|s| VideoSegment {
                    span: s.span,
                    frame_refs: Vec::new(),
                    gt_action: Some(s.label.clone()),
                })
                .collect();
            let labels = video.steps[t..t + z]
                .iter()
                .map(|s| s.label.clone())
                .collect();
            BenchmarkSample {
                sample_id: format!("{}#{t}", video.video_id),
                history: VisualHistory {
                    segments,
                    narrations,
                    goal: Some(video.goal.clone()),
                    vision_block: None,
                },
                gt_future: ActionSequence::new(labels, z).expect("z > 0"),
                task: Task::Vpa,
            }
        })
        .collect()
}

pub fn expand_videos(videos: &[AnnotatedVideo], z: usize) -> Vec<BenchmarkSample> {
    videos.iter().flat_map(|v| expand_video(v, z)).collect()
}
