//! Deterministic synthetic data with the same schema as the real datasets:
//! a small kitchen vocabulary, anticipation and planning mini-sets, example
//! pools, fixture tables that reproduce the ground truth, and the skip
//! analysis fixture.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{expand_videos, AnnotatedStep, AnnotatedVideo};
use crate::prompting::PromptExample;
use crate::providers::stub::{FixtureEntry, FixtureTable};
use crate::session::report::{SessionReport, SkipCounts};
use crate::session::state::{EndReason, Ratings};
use crate::types::{
    ActionLabel, ActionSequence, BenchmarkSample, Narration, NarrationSource, Span,
    SuggestionOutcome, SuggestionRecord, Task, VideoSegment, VisualHistory,
};
use crate::vocab::Vocabulary;

pub const VERBS: [&str; 10] = [
    "take", "put", "cut", "pour", "open", "close", "wash", "stir", "peel", "crack",
];
pub const NOUNS: [&str; 12] = [
    "cup", "milk", "tomato", "knife", "bowl", "pan", "egg", "bread", "plate", "fridge", "onion",
    "spoon",
];

const GOALS: [&str; 6] = [
    "Make a latte",
    "Make pancakes",
    "Make a tomato salad",
    "Make scrambled eggs",
    "Make a sandwich",
    "Make onion soup",
];

/// Seconds per annotated action in generated histories.
const ACTION_SECONDS: f64 = 4.0;

/// The bundled synthetic vocabulary: every pair is feasible except a few
/// nonsensical ones.
pub fn vocabulary() -> Vocabulary {
    let infeasible = [
        ("crack", "knife"),
        ("crack", "fridge"),
        ("peel", "milk"),
        ("pour", "knife"),
    ];
    let mut actions = Vec::new();
    for (vi, v) in VERBS.iter().enumerate() {
        for (ni, n) in NOUNS.iter().enumerate() {
            if !infeasible.contains(&(*v, *n)) {
                actions.push((vi, ni));
            }
        }
    }
    Vocabulary::new(VERBS, NOUNS, &actions).expect("synthetic vocabulary is valid")
}

/// A vocabulary of exactly `n` feasible actions (`n <= 10`): verb `i` with
/// noun `i`.
pub fn small_vocabulary(n: usize) -> Vocabulary {
    let actions: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    Vocabulary::new(
        VERBS[..n].iter().copied(),
        NOUNS[..n].iter().copied(),
        &actions,
    )
    .expect("valid")
}

/// Narration text for a label: `"A person <verb> the <noun>"`.
pub fn narrate(label: &ActionLabel) -> String {
    format!("A person {} the {}", label.verb_text, label.noun_text)
}

fn random_labels(vocab: &Vocabulary, n: usize, rng: &mut ChaCha8Rng) -> Vec<ActionLabel> {
    let feasible = vocab.feasible_labels();
    (0..n)
        .map(|_| feasible.choose(rng).expect("non-empty").clone())
        .collect()
}

fn history_of(labels: &[ActionLabel]) -> VisualHistory {
    let mut h = VisualHistory::default();
    for (i, l) in labels.iter().enumerate() {
        let span =
            Span::new(i as f64 * ACTION_SECONDS, (i + 1) as f64 * ACTION_SECONDS).expect("ordered");
        h.segments.push(VideoSegment {
            span,
            frame_refs: Vec::new(),
            gt_action: Some(l.clone()),
        });
        h.narrations.push(
            Narration::new(narrate(l), span, NarrationSource::GroundTruth).expect("non-empty"),
        );
    }
    h
}

/// Anticipation samples: 8 observed segments with narrations and `future`
/// ground-truth actions. Histories are distinct so fixture lookups by
/// history are unambiguous.
pub fn lta_samples(n: usize, future: usize, seed: u64) -> Vec<BenchmarkSample> {
    lta_samples_with(&vocabulary(), n, future, seed)
}

/// [`lta_samples`] drawing every action from `vocab`.
pub fn lta_samples_with(
    vocab: &Vocabulary,
    n: usize,
    future: usize,
    seed: u64,
) -> Vec<BenchmarkSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let observed = random_labels(vocab, 8, &mut rng);
        let gt = random_labels(vocab, future, &mut rng);
        let history = history_of(&observed);
        if !seen.insert(history.narration_texts()) {
            continue;
        }
        out.push(BenchmarkSample {
            sample_id: format!("lta-{:03}", out.len()),
            history,
            gt_future: ActionSequence::new(gt, future).expect("future > 0"),
            task: Task::Lta,
        });
    }
    out
}

/// Step-annotated planning videos with `min_steps..=max_steps` steps.
pub fn vpa_videos(n: usize, min_steps: usize, max_steps: usize, seed: u64) -> Vec<AnnotatedVideo> {
    let vocab = vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.random_range(min_steps..=max_steps);
            let steps = random_labels(&vocab, k, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(j, label)| AnnotatedStep {
                    narration: narrate(&label),
                    label,
                    span: Span::new(j as f64 * ACTION_SECONDS, (j + 1) as f64 * ACTION_SECONDS)
                        .expect("ordered"),
                })
                .collect();
            AnnotatedVideo {
                video_id: format!("vpa-{i:03}"),
                goal: GOALS[i % GOALS.len()].to_string(),
                steps,
            }
        })
        .collect()
}

/// Planning samples from [`vpa_videos`], keeping the first `n`.
pub fn vpa_samples(n: usize, z: usize, seed: u64) -> Vec<BenchmarkSample> {
    let videos = vpa_videos(n, z + 1, z + 5, seed);
    let mut samples = expand_videos(&videos, z);
    samples.truncate(n);
    samples
}

/// In-context example pool of `n` action sequences, with goals when asked.
pub fn example_pool(n: usize, with_goals: bool, seed: u64) -> Vec<PromptExample> {
    let vocab = vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(8..=14);
            let narrations = random_labels(&vocab, len, &mut rng)
                .iter()
                .map(narrate)
                .collect();
            let goal = with_goals.then(|| GOALS[i % GOALS.len()].to_string());
            PromptExample::new(format!("ex-{i:03}"), narrations, goal)
        })
        .collect()
}

/// Fixture table whose completion for each sample's history is exactly its
/// ground truth, numbered as a continuation of the history.
pub fn cheating_fixture(samples: &[BenchmarkSample]) -> FixtureTable {
    FixtureTable {
        entries: samples
            .iter()
            .map(|s| {
                let history = s.history.narration_texts();
                let start = history.len() + 1;
                let completion = s
                    .gt_future
                    .labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| format!("{}. {}", start + i, narrate(l)))
                    .collect::<Vec<_>>()
                    .join("\n");
                FixtureEntry {
                    history,
                    completion,
                }
            })
            .collect(),
        default: String::new(),
    }
}

/// Skip counts per `(method, activity)` from the published breakdown.
pub const SKIP_TABLE: [(&str, &str, usize, usize, usize); 6] = [
    ("VCLM", "blt", 7, 4, 2),
    ("VCLM", "caprese", 17, 3, 1),
    ("VCLM", "latte", 8, 6, 1),
    ("Socratic", "blt", 16, 4, 3),
    ("Socratic", "caprese", 12, 0, 1),
    ("Socratic", "latte", 5, 12, 3),
];

/// Sessions per `(method, activity)` in the skip fixture.
pub const FIXTURE_SESSIONS_PER_CELL: usize = 6;

fn split(total: usize, parts: usize, k: usize) -> usize {
    total / parts + usize::from(k < total % parts)
}

/// Session reports whose skip outcomes add up to [`SKIP_TABLE`]. Skips are
/// interleaved with executed steps so no report has three skips in a row.
pub fn skip_fixture_reports() -> Vec<SessionReport> {
    let mut out = Vec::new();
    for (method, activity, r, f, i) in SKIP_TABLE {
        for k in 0..FIXTURE_SESSIONS_PER_CELL {
            let mut skips = Vec::new();
            skips.extend(std::iter::repeat_n(
                SuggestionOutcome::SkippedRedundant,
                split(r, FIXTURE_SESSIONS_PER_CELL, k),
            ));
            skips.extend(std::iter::repeat_n(
                SuggestionOutcome::SkippedInfeasible,
                split(f, FIXTURE_SESSIONS_PER_CELL, k),
            ));
            skips.extend(std::iter::repeat_n(
                SuggestionOutcome::SkippedIrrelevant,
                split(i, FIXTURE_SESSIONS_PER_CELL, k),
            ));
            let mut outcomes = Vec::new();
            for (j, s) in skips.iter().enumerate() {
                outcomes.push(*s);
                if j % 2 == 1 {
                    outcomes.push(SuggestionOutcome::Executed);
                }
            }
            outcomes.push(SuggestionOutcome::Executed);
            let suggestions: Vec<SuggestionRecord> = outcomes
                .iter()
                .enumerate()
                .map(|(idx, o)| SuggestionRecord {
                    index: idx,
                    raw_text: match o {
                        SuggestionOutcome::SkippedRedundant => "repeat a completed step",
                        SuggestionOutcome::SkippedInfeasible => "an infeasible step",
                        SuggestionOutcome::SkippedIrrelevant => "an irrelevant step",
                        _ => "a remaining step",
                    }
                    .to_string(),
                    mapped_step: None,
                    outcome: *o,
                    timestamp: idx as f64,
                    done: false,
                })
                .collect();
            let executed = outcomes
                .iter()
                .filter(|o| **o == SuggestionOutcome::Executed)
                .count();
            out.push(SessionReport {
                session_id: format!("{}-{activity}-{k}", method.to_lowercase()),
                script_id: activity.to_string(),
                predictor: method.to_string(),
                success: false,
                end_reason: EndReason::StepCap,
                end_detected: false,
                online_miou: 0.0,
                executed_count: executed,
                skip_breakdown: SkipCounts::from_records(&suggestions),
                system_errors: 0,
                ratings: Ratings {
                    participant: Some(false),
                    admin: Some(false),
                },
                suggestions,
            });
        }
    }
    out
}

/// Expected `(method -> (redundant, infeasible, irrelevant))` totals.
pub fn skip_table_totals() -> BTreeMap<&'static str, (usize, usize, usize)> {
    let mut m = BTreeMap::new();
    for (method, _, r, f, i) in SKIP_TABLE {
        let e = m.entry(method).or_insert((0, 0, 0));
        e.0 += r;
        e.1 += f;
        e.2 += i;
    }
    m
}
