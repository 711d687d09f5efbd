//! Action-anticipation and planning metrics.
//!
//! All sequence metrics compare a prediction against the length-`Z` prefix of
//! the ground truth. Predictions shorter than `Z` are padded with
//! [`ActionLabel::no_action`], which matches nothing, so under-generation is
//! penalised rather than hidden.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ActionLabel, ActionSequence};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("horizon Z must be positive")]
    ZeroHorizon,
    #[error("ground truth has {len} actions but Z = {z}")]
    GroundTruthTooShort { len: usize, z: usize },
    #[error("no candidate sequences given")]
    NoCandidates,
    #[error("cannot aggregate an empty sample list")]
    EmptyAggregate,
}

/// Which token stream of an action sequence is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Verb,
    Noun,
    Action,
}

impl Stream {
    pub const ALL: [Stream; 3] = [Stream::Verb, Stream::Noun, Stream::Action];

    fn key(self, label: &ActionLabel) -> Option<(usize, usize)> {
        match self {
            Stream::Verb => label.verb_key().map(|v| (v, 0)),
            Stream::Noun => label.noun_key().map(|n| (0, n)),
            Stream::Action => label.action_key(),
        }
    }
}

fn check(gt: &ActionSequence, z: usize) -> Result<(), MetricError> {
    if z == 0 {
        return Err(MetricError::ZeroHorizon);
    }
    if gt.len() < z {
        return Err(MetricError::GroundTruthTooShort { len: gt.len(), z });
    }
    Ok(())
}

fn tokens(seq: &ActionSequence, z: usize, stream: Stream) -> Vec<Option<(usize, usize)>> {
    seq.fitted(z).iter().map(|l| stream.key(l)).collect()
}

/// `None` tokens never match, including each other.
fn same<T: PartialEq>(a: &Option<T>, b: &Option<T>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x == y)
}

/// Unit-cost Levenshtein distance (insert, delete, substitute; no
/// transposition). Two-row dynamic programme.
pub fn levenshtein<T: PartialEq>(a: &[Option<T>], b: &[Option<T>]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(!same(x, y));
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance between the length-`Z` prediction and ground-truth
/// prefix, divided by `Z`.
pub fn edit_distance(
    pred: &ActionSequence,
    gt: &ActionSequence,
    z: usize,
    stream: Stream,
) -> Result<f64, MetricError> {
    check(gt, z)?;
    let d = levenshtein(&tokens(pred, z, stream), &tokens(gt, z, stream));
    Ok(d as f64 / z as f64)
}

/// Minimum edit distance over `K` candidate predictions.
pub fn edit_distance_min(
    candidates: &[ActionSequence],
    gt: &ActionSequence,
    z: usize,
    stream: Stream,
) -> Result<f64, MetricError> {
    let mut best: Option<f64> = None;
    for c in candidates {
        let d = edit_distance(c, gt, z, stream)?;
        best = Some(best.map_or(d, |b: f64| b.min(d)));
    }
    best.ok_or(MetricError::NoCandidates)
}

/// Fraction of the `Z` positions where the full action matches.
pub fn mean_accuracy(
    pred: &ActionSequence,
    gt: &ActionSequence,
    z: usize,
) -> Result<f64, MetricError> {
    mean_accuracy_stream(pred, gt, z, Stream::Action)
}

pub fn mean_accuracy_stream(
    pred: &ActionSequence,
    gt: &ActionSequence,
    z: usize,
    stream: Stream,
) -> Result<f64, MetricError> {
    check(gt, z)?;
    let hits = tokens(pred, z, stream)
        .iter()
        .zip(tokens(gt, z, stream))
        .filter(|(p, g)| same(p, g))
        .count();
    Ok(hits as f64 / z as f64)
}

/// Exact, order-respecting match of all `Z` positions.
pub fn success_rate(
    pred: &ActionSequence,
    gt: &ActionSequence,
    z: usize,
) -> Result<bool, MetricError> {
    Ok(mean_accuracy(pred, gt, z)? == 1.0)
}

/// `|A ∩ B| / |A ∪ B|`; the flag is set when both sets are empty (value 0).
pub fn set_iou<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> (f64, bool) {
    let union = a.union(b).count();
    if union == 0 {
        return (0.0, true);
    }
    (a.intersection(b).count() as f64 / union as f64, false)
}

fn action_set(seq: &ActionSequence) -> BTreeSet<(usize, usize)> {
    seq.labels
        .iter()
        .filter_map(ActionLabel::action_key)
        .collect()
}

/// Order-agnostic IoU over full action labels; duplicates collapse and
/// `NO_ACTION` padding is ignored.
pub fn miou(pred: &ActionSequence, gt: &ActionSequence) -> f64 {
    miou_flagged(pred, gt).0
}

pub fn miou_flagged(pred: &ActionSequence, gt: &ActionSequence) -> (f64, bool) {
    set_iou(&action_set(pred), &action_set(gt))
}

/// Per-sample values; a metric not computed for the task is `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ed_verb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ed_noun: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ed_action: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<f64>,
}

impl SampleMetrics {
    fn fields(&self) -> [Option<f64>; 6] {
        [
            self.ed_verb,
            self.ed_noun,
            self.ed_action,
            self.macc,
            self.miou,
            self.sr,
        ]
    }

    fn from_fields(f: [Option<f64>; 6]) -> Self {
        Self {
            ed_verb: f[0],
            ed_noun: f[1],
            ed_action: f[2],
            macc: f[3],
            miou: f[4],
            sr: f[5],
        }
    }

    /// Verb, noun and action edit distance for an anticipation sample.
    pub fn anticipation(
        pred: &ActionSequence,
        gt: &ActionSequence,
        z: usize,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            ed_verb: Some(edit_distance(pred, gt, z, Stream::Verb)?),
            ed_noun: Some(edit_distance(pred, gt, z, Stream::Noun)?),
            ed_action: Some(edit_distance(pred, gt, z, Stream::Action)?),
            ..Self::default()
        })
    }

    /// mAcc for `Z = 1`; SR, mAcc and mIoU otherwise.
    pub fn planning(
        pred: &ActionSequence,
        gt: &ActionSequence,
        z: usize,
    ) -> Result<Self, MetricError> {
        let macc = mean_accuracy(pred, gt, z)?;
        if z == 1 {
            return Ok(Self {
                macc: Some(macc),
                ..Self::default()
            });
        }
        Ok(Self {
            macc: Some(macc),
            sr: Some(if success_rate(pred, gt, z)? { 1.0 } else { 0.0 }),
            miou: Some(miou(pred, &gt.truncated(z))),
            ..Self::default()
        })
    }

    pub fn iou_only(value: f64) -> Self {
        Self {
            miou: Some(value),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub evaluated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub z: usize,
    pub per_sample: BTreeMap<String, SampleMetrics>,
    pub aggregates: SampleMetrics,
    pub counts: SampleCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Arithmetic mean of each metric over the samples where it is defined.
pub fn aggregate(
    samples: impl IntoIterator<Item = (String, SampleMetrics)>,
    z: usize,
) -> Result<MetricReport, MetricError> {
    let per_sample: BTreeMap<String, SampleMetrics> = samples.into_iter().collect();
    if per_sample.is_empty() {
        return Err(MetricError::EmptyAggregate);
    }
    let mut sums = [0.0f64; 6];
    let mut counts = [0usize; 6];
    for m in per_sample.values() {
        for (i, v) in m.fields().iter().enumerate() {
            if let Some(v) = v {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    let mut means = [None; 6];
    for i in 0..6 {
        if counts[i] > 0 {
            means[i] = Some(sums[i] / counts[i] as f64);
        }
    }
    Ok(MetricReport {
        z,
        counts: SampleCounts {
            evaluated: per_sample.len(),
            skipped: 0,
        },
        per_sample,
        aggregates: SampleMetrics::from_fields(means),
        flags: Vec::new(),
    })
}

/// Percentage with one decimal, the presentation used in report tables.
pub fn percent(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

fn cell(v: Option<f64>, pct: bool) -> String {
    match v {
        None => "-".into(),
        Some(v) if pct => percent(v),
        Some(v) => format!("{v:.3}"),
    }
}

impl MetricReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Fixed-width table. Edit distances print as fractions (Verb/Noun/Action
    /// columns); SR, mAcc and mIoU print as percentages.
    pub fn render_table(&self, label: &str) -> String {
        let a = &self.aggregates;
        let mut out = String::new();
        let has_ed = a.ed_action.is_some() || a.ed_verb.is_some() || a.ed_noun.is_some();
        let has_plan = a.sr.is_some() || a.macc.is_some() || a.miou.is_some();
        let _ = writeln!(
            out,
            "{:<24} {:>4} {:>8} {:>8}",
            "Model", "Z", "Samples", "Skipped"
        );
        let _ = writeln!(
            out,
            "{:<24} {:>4} {:>8} {:>8}",
            label, self.z, self.counts.evaluated, self.counts.skipped
        );
        if has_ed {
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>8}",
                "ED@Z", "Verb", "Noun", "Action"
            );
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>8}",
                label,
                cell(a.ed_verb, false),
                cell(a.ed_noun, false),
                cell(a.ed_action, false)
            );
        }
        if has_plan {
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>8}",
                "Planning (%)", "SR", "mAcc", "mIoU"
            );
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>8}",
                label,
                cell(a.sr, true),
                cell(a.macc, true),
                cell(a.miou, true)
            );
        }
        for f in &self.flags {
            let _ = writeln!(out, "note: {f}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(pairs: &[(usize, usize)]) -> ActionSequence {
        ActionSequence::from_labels(
            pairs
                .iter()
                .map(|&(v, n)| ActionLabel::new(v, n, format!("v{v}"), format!("n{n}")))
                .collect(),
        )
    }

    #[test]
    fn identity_is_zero_distance() {
        let g = seq(&[(0, 0), (1, 1), (2, 2)]);
        for s in Stream::ALL {
            assert_eq!(edit_distance(&g, &g, 3, s).unwrap(), 0.0);
        }
        assert_eq!(mean_accuracy(&g, &g, 3).unwrap(), 1.0);
        assert!(success_rate(&g, &g, 3).unwrap());
    }

    #[test]
    fn disjoint_sequences_are_all_substitutions() {
        let p = seq(&[(0, 0), (1, 1), (2, 2)]);
        let g = seq(&[(3, 3), (4, 4), (5, 5)]);
        assert_eq!(edit_distance(&p, &g, 3, Stream::Action).unwrap(), 1.0);
    }

    #[test]
    fn swapped_steps() {
        // take cup, pour milk, froth milk vs take cup, froth milk, pour milk
        let p = seq(&[(0, 0), (1, 1), (2, 1)]);
        let g = seq(&[(0, 0), (2, 1), (1, 1)]);
        assert!((edit_distance(&p, &g, 3, Stream::Action).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(!success_rate(&p, &g, 3).unwrap());
        assert_eq!(miou(&p, &g), 1.0);
    }

    #[test]
    fn positional_accuracy() {
        let p = seq(&[(0, 0), (9, 9), (2, 2), (9, 8)]);
        let g = seq(&[(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(mean_accuracy(&p, &g, 4).unwrap(), 0.5);
        let empty = seq(&[]);
        assert_eq!(mean_accuracy(&empty, &g, 3).unwrap(), 0.0);
    }

    #[test]
    fn one_substitution_fails_success() {
        let g = seq(&[(0, 0), (1, 1), (2, 2)]);
        let p = seq(&[(0, 0), (5, 5), (2, 2)]);
        assert!(!success_rate(&p, &g, 3).unwrap());
    }

    #[test]
    fn iou_cases() {
        let (a, b, c, d) = ((0, 0), (1, 1), (2, 2), (3, 3));
        assert_eq!(miou(&seq(&[a, b, c]), &seq(&[a, b, d])), 0.5);
        assert_eq!(miou(&seq(&[]), &seq(&[a])), 0.0);
        assert_eq!(miou(&seq(&[a, a, b]), &seq(&[b, a])), 1.0);
        assert_eq!(miou_flagged(&seq(&[]), &seq(&[])), (0.0, true));
    }

    #[test]
    fn argument_errors() {
        let g = seq(&[(0, 0)]);
        assert_eq!(
            edit_distance(&g, &g, 0, Stream::Action),
            Err(MetricError::ZeroHorizon)
        );
        assert_eq!(
            mean_accuracy(&g, &g, 2),
            Err(MetricError::GroundTruthTooShort { len: 1, z: 2 })
        );
        assert_eq!(
            edit_distance_min(&[], &g, 1, Stream::Action),
            Err(MetricError::NoCandidates)
        );
    }

    #[test]
    fn no_action_padding_never_matches() {
        let pad = ActionSequence::from_labels(vec![ActionLabel::no_action()]);
        assert_eq!(edit_distance(&pad, &pad, 1, Stream::Action).unwrap(), 1.0);
        assert_eq!(mean_accuracy(&pad, &pad, 1).unwrap(), 0.0);
        let g = seq(&[(0, 0)]);
        assert_eq!(edit_distance(&pad, &g, 1, Stream::Verb).unwrap(), 1.0);
    }

    #[test]
    fn min_over_candidates() {
        let g = seq(&[(0, 0), (1, 1)]);
        let bad = seq(&[(5, 5), (6, 6)]);
        let half = seq(&[(0, 0), (6, 6)]);
        assert_eq!(
            edit_distance_min(&[bad, half], &g, 2, Stream::Action).unwrap(),
            0.5
        );
    }

    #[test]
    fn aggregation() {
        let r = aggregate(
            [
                ("a".to_string(), SampleMetrics::iou_only(0.2)),
                ("b".to_string(), SampleMetrics::iou_only(0.4)),
            ],
            3,
        )
        .unwrap();
        assert!((r.aggregates.miou.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(r.aggregates.sr, None);
        let single = aggregate([("a".to_string(), SampleMetrics::iou_only(0.7))], 3).unwrap();
        assert_eq!(single.aggregates, SampleMetrics::iou_only(0.7));
        assert_eq!(
            aggregate(Vec::<(String, SampleMetrics)>::new(), 1),
            Err(MetricError::EmptyAggregate)
        );
    }

    #[test]
    fn eighteen_sessions_render_one_decimal_percent() {
        // 18 values with mean exactly 0.304.
        let vals: Vec<f64> = (0..18)
            .map(|i| 0.304 + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let r = aggregate(
            vals.iter()
                .enumerate()
                .map(|(i, v)| (format!("s{i:02}"), SampleMetrics::iou_only(*v))),
            1,
        )
        .unwrap();
        assert_eq!(percent(r.aggregates.miou.unwrap()), "30.4");
        assert!(r.render_table("Socratic 13B").contains("30.4"));
    }
}
