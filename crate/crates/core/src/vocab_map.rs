//! Mapping free-form sentences onto the closed `(verb, noun)` space.
//!
//! Each content word of a sentence is compared with every verb and noun by
//! embedding cosine. The verb and noun may come from different words. If the
//! best pair is not a feasible action, it is replaced by the feasible action
//! with the highest verb-plus-noun similarity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;
use crate::providers::{Embedder, ProviderError};
use crate::text::content_words;
use crate::types::{ActionLabel, ActionSequence};
use crate::vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("no candidate terms given")]
    NoCandidates,
    #[error("sentence `{0}` has no content words")]
    NoTokens(String),
    #[error("embedding `{word}` failed: {source}")]
    Provider { word: String, source: ProviderError },
    #[error("vocabulary has no feasible actions")]
    NoFeasibleActions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    pub sentence: String,
    pub label: ActionLabel,
    pub verb_sim: f64,
    pub noun_sim: f64,
    pub feasibility_adjusted: bool,
}

fn argmax(query: &EmbeddingVector, candidates: &[EmbeddingVector]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let s = query.cosine(c);
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// Closest candidate to `word` by cosine; ties go to the lowest index.
pub fn nearest_term(
    word: &str,
    candidates: &[String],
    embedder: &dyn Embedder,
) -> Result<(String, f64), MapError> {
    if candidates.is_empty() {
        return Err(MapError::NoCandidates);
    }
    let wrap = |source| MapError::Provider {
        word: word.to_string(),
        source,
    };
    let q = embedder.embed_one(word).map_err(wrap)?;
    let cands = embedder.embed(candidates).map_err(wrap)?;
    let (i, s) = argmax(&q, &cands);
    Ok((candidates[i].clone(), s))
}

/// Embeddings of every verb and noun of a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TermIndex {
    verbs: Vec<EmbeddingVector>,
    nouns: Vec<EmbeddingVector>,
}

impl TermIndex {
    pub fn new(vocab: &Vocabulary, embedder: &dyn Embedder) -> Result<Self, MapError> {
        let wrap = |source| MapError::Provider {
            word: "<vocabulary>".into(),
            source,
        };
        Ok(Self {
            verbs: embedder.embed(vocab.verbs()).map_err(wrap)?,
            nouns: embedder.embed(vocab.nouns()).map_err(wrap)?,
        })
    }
}

/// A vocabulary with its term embeddings computed once.
pub struct VocabMapper<'a> {
    vocab: &'a Vocabulary,
    embedder: &'a dyn Embedder,
    index: Arc<TermIndex>,
}

impl<'a> VocabMapper<'a> {
    pub fn new(vocab: &'a Vocabulary, embedder: &'a dyn Embedder) -> Result<Self, MapError> {
        let index = Arc::new(TermIndex::new(vocab, embedder)?);
        Self::with_index(vocab, embedder, index)
    }

    /// `index` must have been built from `vocab` with `embedder`.
    pub fn with_index(
        vocab: &'a Vocabulary,
        embedder: &'a dyn Embedder,
        index: Arc<TermIndex>,
    ) -> Result<Self, MapError> {
        if vocab.actions().is_empty() {
            return Err(MapError::NoFeasibleActions);
        }
        Ok(Self {
            vocab,
            embedder,
            index,
        })
    }

    pub fn map_sentence(&self, sentence: &str) -> Result<MappingResult, MapError> {
        let words = content_words(sentence);
        if words.is_empty() {
            return Err(MapError::NoTokens(sentence.to_string()));
        }
        let wvecs = self
            .embedder
            .embed(&words)
            .map_err(|source| MapError::Provider {
                word: words.join(" "),
                source,
            })?;
        // Best similarity of any word to each verb and noun.
        let best_over_words = |terms: &[EmbeddingVector]| -> Vec<f64> {
            terms
                .iter()
                .map(|t| {
                    wvecs
                        .iter()
                        .map(|w| w.cosine(t))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        };
        let verb_best = best_over_words(&self.index.verbs);
        let noun_best = best_over_words(&self.index.nouns);
        let pick = |scores: &[f64]| {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, s) in scores.iter().enumerate() {
                if *s > best.1 {
                    best = (i, *s);
                }
            }
            best
        };
        let (v, vs) = pick(&verb_best);
        let (n, ns) = pick(&noun_best);
        let (v, n, vs, ns, adjusted) = if self.vocab.is_feasible(v, n) {
            (v, n, vs, ns, false)
        } else {
            let mut best: Option<((usize, usize), f64)> = None;
            for &(fv, fn_) in self.vocab.actions() {
                let s = verb_best[fv] + noun_best[fn_];
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some(((fv, fn_), s));
                }
            }
            let ((fv, fn_), _) = best.expect("non-empty action set");
            (fv, fn_, verb_best[fv], noun_best[fn_], true)
        };
        Ok(MappingResult {
            sentence: sentence.to_string(),
            label: self.vocab.label(v, n).expect("indices from the vocabulary"),
            verb_sim: vs,
            noun_sim: ns,
            feasibility_adjusted: adjusted,
        })
    }

    /// Maps each sentence in order; unmappable sentences become `NO_ACTION`.
    pub fn map_sequence(&self, sentences: &[String]) -> ActionSequence {
        ActionSequence::from_labels(
            sentences
                .iter()
                .map(|s| {
                    self.map_sentence(s)
                        .map(|m| m.label)
                        .unwrap_or_else(|_| ActionLabel::no_action())
                })
                .collect(),
        )
    }
}

pub fn map_sentence(
    sentence: &str,
    vocab: &Vocabulary,
    embedder: &dyn Embedder,
) -> Result<MappingResult, MapError> {
    VocabMapper::new(vocab, embedder)?.map_sentence(sentence)
}

pub fn map_sequence(
    sentences: &[String],
    vocab: &Vocabulary,
    embedder: &dyn Embedder,
) -> Result<ActionSequence, MapError> {
    Ok(VocabMapper::new(vocab, embedder)?.map_sequence(sentences))
}
