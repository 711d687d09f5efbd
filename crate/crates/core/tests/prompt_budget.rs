use std::sync::Arc;

use egoassist_core::history::{encode_online_history, StreamConfig};
use egoassist_core::pipelines::{PredictorConfig, PredictorKind};
use egoassist_core::prompting::budget::fit_to_budget;
use egoassist_core::prompting::templates::{lta_parts, vpa_parts};
use egoassist_core::prompting::PromptExample;
use egoassist_core::providers::stub::BagOfWordsEmbedder;
use egoassist_core::providers::{Providers, Tokenizer, WordTokenizer};
use egoassist_core::session::assistants::EchoSummarizer;
use egoassist_core::{Narration, NarrationSource, Span, Task};
use proptest::prelude::*;

const WORDS: [&str; 8] = ["take", "cup", "pour", "milk", "stir", "pan", "cut", "bread"];

fn sentence(len: usize, seed: usize) -> String {
    let body: Vec<&str> = (0..len)
        .map(|i| WORDS[(seed + i * 3) % WORDS.len()])
        .collect();
    format!("A person {}", body.join(" "))
}

fn example_set() -> impl Strategy<Value = Vec<PromptExample>> {
    prop::collection::vec((1..30usize, 1..25usize, 0..100usize), 0..=12).prop_map(|specs| {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (lines, len, seed))| {
                let ns = (0..lines).map(|j| sentence(len, seed + j)).collect();
                PromptExample::new(format!("ex-{i:02}"), ns, Some(format!("goal {i}")))
            })
            .collect()
    })
}

fn history() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((1..12usize, 0..100usize), 1..40).prop_map(|v| {
        v.into_iter()
            .map(|(len, seed)| sentence(len, seed))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vision_reservation_never_admits_more_examples(
        examples in example_set(),
        hist in history(),
        z in 1..25usize,
        vpa in any::<bool>(),
    ) {
        let parts = if vpa {
            vpa_parts(Some("make a latte"), &examples, &hist, z, true).unwrap()
        } else {
            lta_parts(&examples, &hist, z)
        };
        let task = if vpa { Task::Vpa } else { Task::Lta };
        let tok = WordTokenizer;
        let fit = |kind| {
            let cfg = PredictorConfig::of_kind(kind, task, z);
            fit_to_budget(&parts, &tok, cfg.context_limit, cfg.reserved()).map(|p| (p, cfg))
        };
        let soc = fit(PredictorKind::Socratic);
        let vclm = fit(PredictorKind::Vclm);
        for (p, cfg) in soc.iter().chain(vclm.iter()) {
            prop_assert!(p.token_count + cfg.reserved() <= cfg.context_limit);
            prop_assert_eq!(p.token_count, tok.count(&p.text));
            let ranked: Vec<&str> = examples.iter().take(p.examples_used.len()).map(|e| e.example_id.as_str()).collect();
            prop_assert_eq!(p.examples_used.iter().map(String::as_str).collect::<Vec<_>>(), ranked);
        }
        match (&soc, &vclm) {
            (Ok((s, _)), Ok((v, _))) => prop_assert!(v.examples_used.len() <= s.examples_used.len()),
            (Err(_), Ok(_)) => prop_assert!(false, "vclm fit where socratic overflowed"),
            _ => {}
        }
    }
}

#[test]
fn clustering_and_summarisation_shrink_redundant_histories() {
    let steps = [
        "takes a cup",
        "pours milk into the cup",
        "stirs the milk",
        "cuts the bread",
    ];
    let mut ns = Vec::new();
    for (i, s) in steps.iter().enumerate() {
        for k in 0..4 {
            let t = (i * 4 + k) as f64;
            ns.push(
                Narration::new(
                    format!("A person {s}"),
                    Span::new(t, t + 1.0).unwrap(),
                    NarrationSource::GroundTruth,
                )
                .unwrap(),
            );
        }
    }
    let providers = Providers::new(
        Arc::new(EchoSummarizer),
        Arc::new(BagOfWordsEmbedder::default()),
    );
    let enc = encode_online_history(
        &[],
        &ns,
        "make breakfast",
        &StreamConfig::default(),
        &providers,
        false,
    )
    .unwrap();
    let tok = WordTokenizer;
    let raw: usize = ns.iter().map(|n| tok.count(&n.text)).sum();
    let kept: usize = enc
        .history
        .narrations
        .iter()
        .map(|n| tok.count(&n.text))
        .sum();
    assert_eq!(enc.raw_narrations, 16);
    assert_eq!(enc.clusters, 4);
    assert_eq!(enc.history.narrations.len(), 4);
    assert!(kept * 4 <= raw);
}
