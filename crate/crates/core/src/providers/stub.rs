//! Deterministic providers for tests and desk-scale runs.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Embedder, LanguageModel, Narrator, ProviderDescriptor, ProviderError, ProviderKind,
    VisionEncoder,
};
use crate::embedding::EmbeddingVector;
use crate::prompting::parse::query_history;
use crate::text::{content_words, fnv1a, stem};
use crate::types::{Narration, NarrationSource, Span, VideoSegment, VisionTokenBlock};
use crate::vocab::Vocabulary;

pub const BAG_OF_WORDS_DIM: usize = 4096;

fn check_texts(texts: &[String]) -> Result<(), ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::Argument("embed called with no texts".into()));
    }
    Ok(())
}

/// Binary bag of stemmed content words hashed into a fixed dimension.
/// Texts with disjoint content vocabularies are orthogonal.
#[derive(Debug, Clone, Copy)]
pub struct BagOfWordsEmbedder {
    dim: usize,
}

impl Default for BagOfWordsEmbedder {
    fn default() -> Self {
        Self {
            dim: BAG_OF_WORDS_DIM,
        }
    }
}

impl BagOfWordsEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }

    pub fn bucket(&self, word: &str) -> usize {
        (fnv1a(stem(word).as_bytes()) % self.dim as u64) as usize
    }

    fn vector_for_words<I: IntoIterator<Item = String>>(&self, words: I) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim];
        for w in words {
            v[self.bucket(&w)] = 1.0;
        }
        EmbeddingVector::new(v).expect("finite")
    }

    pub fn vector(&self, text: &str) -> EmbeddingVector {
        self.vector_for_words(content_words(text))
    }
}

impl Embedder for BagOfWordsEmbedder {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Embedder, "bag-of-words")
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_texts(texts)?;
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Synonym table for [`SynonymEmbedder`]: words map to a canonical word,
/// and optionally words map straight to vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynonymTable {
    #[serde(default)]
    pub canonical: HashMap<String, String>,
    #[serde(default)]
    pub vectors: HashMap<String, Vec<f64>>,
}

impl SynonymTable {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self {
            canonical: pairs
                .into_iter()
                .map(|(w, c)| (w.to_string(), c.to_string()))
                .collect(),
            vectors: HashMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let raw = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ProviderError::Argument(format!("synonym table: {e}")))?;
        serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Argument(format!("synonym table: {e}")))
    }
}

/// Bag-of-words embedder that first rewrites words through a synonym table.
/// When the table has vectors, a text embeds to the sum of its words'
/// vectors instead (unknown words contribute nothing).
#[derive(Debug, Clone)]
pub struct SynonymEmbedder {
    table: SynonymTable,
    bag: BagOfWordsEmbedder,
    vector_dim: Option<usize>,
}

impl SynonymEmbedder {
    pub fn new(table: SynonymTable) -> Result<Self, ProviderError> {
        let mut dims = table.vectors.values().map(Vec::len);
        let vector_dim = dims.next();
        if let Some(d) = vector_dim {
            if d == 0 || dims.any(|x| x != d) {
                return Err(ProviderError::Argument(
                    "synonym vectors must share one positive dimension".into(),
                ));
            }
        }
        Ok(Self {
            table,
            bag: BagOfWordsEmbedder::default(),
            vector_dim,
        })
    }

    fn canonical(&self, word: &str) -> String {
        let c = self
            .table
            .canonical
            .get(word)
            .or_else(|| self.table.canonical.get(&stem(word)))
            .cloned()
            .unwrap_or_else(|| word.to_string());
        c.to_lowercase()
    }

    fn vector(&self, text: &str) -> EmbeddingVector {
        let words: Vec<String> = content_words(text)
            .iter()
            .map(|w| self.canonical(w))
            .collect();
        match self.vector_dim {
            None => self.bag.vector_for_words(words),
            Some(dim) => {
                let mut acc = vec![0.0; dim];
                for w in words {
                    let found = self
                        .table
                        .vectors
                        .get(&w)
                        .or_else(|| self.table.vectors.get(&stem(&w)));
                    if let Some(v) = found {
                        for (a, x) in acc.iter_mut().zip(v) {
                            *a += x;
                        }
                    }
                }
                EmbeddingVector::new(acc).expect("finite table")
            }
        }
    }
}

impl Embedder for SynonymEmbedder {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Embedder, "synonym-table")
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_texts(texts)?;
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Memoises another embedder by exact input string. Safe for concurrent
/// readers and writers.
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    cache: RwLock<HashMap<String, EmbeddingVector>>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> Self {
        Self {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Embedder for CachedEmbedder {
    fn descriptor(&self) -> ProviderDescriptor {
        self.inner.descriptor()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_texts(texts)?;
        let missing: Vec<String> = {
            let cache = self.cache.read().expect("cache lock");
            let mut m: Vec<String> = texts
                .iter()
                .filter(|t| !cache.contains_key(*t))
                .cloned()
                .collect();
            m.sort();
            m.dedup();
            m
        };
        if !missing.is_empty() {
            let fresh = self.inner.embed(&missing)?;
            let mut cache = self.cache.write().expect("cache lock");
            for (t, v) in missing.into_iter().zip(fresh) {
                cache.insert(t, v);
            }
        }
        let cache = self.cache.read().expect("cache lock");
        Ok(texts.iter().map(|t| cache[t].clone()).collect())
    }
}

/// Keeps the first `n` whitespace-separated tokens of `text`, preserving
/// line structure.
pub fn limit_tokens(text: &str, n: usize) -> String {
    let mut count = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            count += 1;
            if count > n {
                return text[..i].trim_end().to_string();
            }
        }
    }
    text.to_string()
}

/// What a stub language model saw on one call.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedCall {
    pub prompt: String,
    pub vision_payload: Option<String>,
}

#[derive(Debug, Default)]
pub struct CallLog(Mutex<Vec<LoggedCall>>);

impl CallLog {
    pub fn record(&self, prompt: &str, vision: Option<&VisionTokenBlock>) {
        self.0.lock().expect("call log").push(LoggedCall {
            prompt: prompt.to_string(),
            vision_payload: vision.map(|v| v.payload.clone()),
        });
    }

    pub fn calls(&self) -> Vec<LoggedCall> {
        self.0.lock().expect("call log").clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("call log").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub history: Vec<String>,
    pub completion: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureTable {
    #[serde(default)]
    pub entries: Vec<FixtureEntry>,
    #[serde(default)]
    pub default: String,
}

impl FixtureTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let raw = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ProviderError::Argument(format!("fixture table: {e}")))?;
        serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Argument(format!("fixture table: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("fixture serialises"),
        )
    }
}

/// Planner stub that looks up its completion by the query history in the
/// prompt (the numbered lines under the current-video header).
pub struct FixtureLlm {
    name: String,
    table: HashMap<Vec<String>, String>,
    default: String,
    log: CallLog,
}

impl FixtureLlm {
    pub fn new(name: &str, table: FixtureTable) -> Self {
        Self {
            name: name.to_string(),
            table: table
                .entries
                .into_iter()
                .map(|e| (e.history, e.completion))
                .collect(),
            default: table.default,
            log: CallLog::default(),
        }
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }
}

impl LanguageModel for FixtureLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, &self.name)
    }

    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        self.log.record(prompt, vision);
        let key = query_history(prompt);
        let text = self.table.get(&key).unwrap_or(&self.default);
        Ok(limit_tokens(text, max_new_tokens))
    }
}

/// Always answers with the same text. With prose this reproduces a model
/// that never produces a numbered list.
pub struct CannedLlm {
    name: String,
    text: String,
    log: CallLog,
}

pub const DEFAULT_PROSE: &str = "The video shows a kitchen counter with several objects on it. \
It is hard to say what happens next without more context.";

impl CannedLlm {
    pub fn new(name: &str, text: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            text: text.into(),
            log: CallLog::default(),
        }
    }

    pub fn prose() -> Self {
        Self::new("prose", DEFAULT_PROSE)
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }
}

impl LanguageModel for CannedLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, &self.name)
    }

    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        self.log.record(prompt, vision);
        Ok(limit_tokens(&self.text, max_new_tokens))
    }
}

/// Emits `lines` uniformly random feasible actions, seeded by the prompt so
/// repeated runs agree.
pub struct RandomLlm {
    labels: Vec<String>,
    lines: usize,
    seed: u64,
}

impl RandomLlm {
    pub fn new(vocab: &Vocabulary, lines: usize, seed: u64) -> Self {
        Self {
            labels: vocab.feasible_labels().iter().map(|l| l.phrase()).collect(),
            lines,
            seed,
        }
    }
}

impl LanguageModel for RandomLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, "random")
    }

    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        _vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(prompt.as_bytes()));
        let text = (1..=self.lines)
            .map(|i| {
                format!(
                    "{i}. {}",
                    self.labels.choose(&mut rng).expect("non-empty vocabulary")
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        Ok(limit_tokens(&text, max_new_tokens))
    }
}

/// Returns its items one per call as a single numbered line, repeating the
/// last item once exhausted.
pub struct SequenceLlm {
    name: String,
    items: Vec<String>,
    next: Mutex<usize>,
}

impl SequenceLlm {
    pub fn new(name: &str, items: Vec<String>) -> Self {
        assert!(!items.is_empty(), "sequence stub needs at least one item");
        Self {
            name: name.to_string(),
            items,
            next: Mutex::new(0),
        }
    }
}

impl LanguageModel for SequenceLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, &self.name)
    }

    fn complete(
        &self,
        _prompt: &str,
        max_new_tokens: usize,
        _vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        let mut next = self.next.lock().expect("sequence lock");
        let item = &self.items[(*next).min(self.items.len() - 1)];
        *next += 1;
        Ok(limit_tokens(&format!("1. {item}"), max_new_tokens))
    }
}

/// Fails every call; stands in for an unreachable backend.
pub struct FailingLlm;

impl LanguageModel for FailingLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Llm, "failing")
    }

    fn complete(
        &self,
        _: &str,
        _: usize,
        _: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        Err(ProviderError::Transport {
            provider: "failing".into(),
            attempts: 1,
            message: "connection refused".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedInterval {
    pub span: Span,
    pub text: String,
}

pub const IDLE_NARRATION: &str = "A person looks around the kitchen";

/// Narrates a clip from an annotation timeline instead of pixels: the
/// annotation overlapping the clip most (earliest on ties) is repeated `k`
/// times.
#[derive(Debug, Clone, Default)]
pub struct GroundTruthNarrator {
    timeline: Vec<AnnotatedInterval>,
    min_clip_s: f64,
}

impl GroundTruthNarrator {
    pub fn new(timeline: Vec<AnnotatedInterval>) -> Self {
        Self {
            timeline,
            min_clip_s: 0.0,
        }
    }

    pub fn with_min_clip(mut self, seconds: f64) -> Self {
        self.min_clip_s = seconds;
        self
    }

    pub fn annotation_for(&self, span: &Span) -> &str {
        let mut best: Option<(&AnnotatedInterval, f64)> = None;
        for a in &self.timeline {
            let o = a.span.overlap_s(span);
            if o > 0.0 && best.is_none_or(|(_, b)| o > b) {
                best = Some((a, o));
            }
        }
        best.map_or(IDLE_NARRATION, |(a, _)| a.text.as_str())
    }
}

impl Narrator for GroundTruthNarrator {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::Narrator, "ground-truth")
    }

    fn narrate(&self, clip: &VideoSegment, k: usize) -> Result<Vec<Narration>, ProviderError> {
        if k == 0 {
            return Err(ProviderError::Argument("k must be at least 1".into()));
        }
        let duration = clip.span.duration_s();
        if duration <= 0.0 && clip.frame_refs.is_empty() {
            return Err(ProviderError::Argument("empty clip".into()));
        }
        if duration < self.min_clip_s {
            return Err(ProviderError::ClipTooShort {
                duration_s: duration,
                minimum_s: self.min_clip_s,
            });
        }
        let text = self.annotation_for(&clip.span);
        let n = Narration::new(text, clip.span, NarrationSource::Narrator)
            .map_err(|e| ProviderError::Argument(e.to_string()))?;
        Ok(vec![n; k])
    }
}

/// Returns a placeholder block tagged with a hash of the input segments.
#[derive(Debug, Clone, Copy)]
pub struct StubVisionEncoder {
    pub token_count: usize,
}

impl Default for StubVisionEncoder {
    fn default() -> Self {
        Self {
            token_count: crate::types::DEFAULT_VISION_TOKENS,
        }
    }
}

impl VisionEncoder for StubVisionEncoder {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::VisionEncoder, "stub-vision")
    }

    fn encode(&self, segments: &[VideoSegment]) -> Result<VisionTokenBlock, ProviderError> {
        if segments.is_empty() {
            return Err(ProviderError::Argument("no segments to encode".into()));
        }
        let mut key = String::new();
        for s in segments {
            key.push_str(&format!("{:?}|{:?};", s.span.start_s(), s.span.end_s()));
            for f in &s.frame_refs {
                key.push_str(&f.id);
                key.push(',');
            }
        }
        VisionTokenBlock::new(
            self.token_count,
            format!("stub-vision:{:016x}", fnv1a(key.as_bytes())),
        )
        .map_err(|e| ProviderError::Argument(e.to_string()))
    }
}

/// A vision encoder that is never reachable.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableVisionEncoder;

impl VisionEncoder for UnavailableVisionEncoder {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::stub(ProviderKind::VisionEncoder, "unavailable")
    }

    fn encode(&self, _segments: &[VideoSegment]) -> Result<VisionTokenBlock, ProviderError> {
        Err(ProviderError::Unavailable(
            "vision encoder unavailable; fall back to the Socratic pipeline".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FrameRef;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bag_of_words_cosines() {
        let e = BagOfWordsEmbedder::default();
        let v = e
            .embed(&strings(&["cut tomato", "cut tomato", "pour milk"]))
            .unwrap();
        assert_eq!(v[0], v[1]);
        assert!((v[0].cosine(&v[1]) - 1.0).abs() < 1e-12);
        assert_eq!(v[0].cosine(&v[2]), 0.0);
        assert!(e.embed(&[]).is_err());
    }

    #[test]
    fn bag_of_words_partial_overlap() {
        let e = BagOfWordsEmbedder::default();
        // {person, cut, tomato} vs {cut, bread}
        let c = e
            .vector("A person cuts the tomato")
            .cosine(&e.vector("cut bread"));
        assert!((c - 1.0 / 3f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn synonym_canonicalisation() {
        let e = SynonymEmbedder::new(SynonymTable::from_pairs([("slice", "cut")])).unwrap();
        let v = e.embed(&strings(&["slices", "cut", "pour"])).unwrap();
        assert!((v[0].cosine(&v[1]) - 1.0).abs() < 1e-12);
        assert_eq!(v[0].cosine(&v[2]), 0.0);
    }

    #[test]
    fn synonym_vectors() {
        let mut t = SynonymTable::default();
        t.vectors.insert("cut".into(), vec![1.0, 0.0]);
        t.vectors.insert("slice".into(), vec![0.8, 0.6]);
        let e = SynonymEmbedder::new(t).unwrap();
        let c = e
            .embed_one("slices")
            .unwrap()
            .cosine(&e.embed_one("cut").unwrap());
        assert!((c - 0.8).abs() < 1e-12);
        let mut bad = SynonymTable::default();
        bad.vectors.insert("a".into(), vec![1.0]);
        bad.vectors.insert("b".into(), vec![1.0, 2.0]);
        assert!(SynonymEmbedder::new(bad).is_err());
    }

    #[test]
    fn cache_returns_inner_values() {
        let inner = Arc::new(BagOfWordsEmbedder::default());
        let cached = CachedEmbedder::new(inner.clone());
        let texts = strings(&["a cup", "pour milk", "a cup"]);
        assert_eq!(cached.embed(&texts).unwrap(), inner.embed(&texts).unwrap());
        assert_eq!(cached.len(), 2);
    }

    #[test]
    fn token_limit() {
        assert_eq!(limit_tokens("1. cut tomato\n2. pour oil", 0), "");
        assert_eq!(
            limit_tokens("1. cut tomato\n2. pour oil", 4),
            "1. cut tomato\n2."
        );
        assert_eq!(limit_tokens("a b", 10), "a b");
    }

    #[test]
    fn fixture_lookup_by_query_history() {
        let llm = FixtureLlm::new(
            "echo-planner",
            FixtureTable {
                entries: vec![FixtureEntry {
                    history: strings(&["take cup", "pour milk"]),
                    completion: "3. froth milk\n4. serve latte".into(),
                }],
                default: "no".into(),
            },
        );
        let prompt =
            "task\n#Visual history from current video:\n    1. take cup\n    2. pour milk\n    3.";
        assert_eq!(
            llm.complete(prompt, 512, None).unwrap(),
            "3. froth milk\n4. serve latte"
        );
        assert_eq!(llm.complete("other", 512, None).unwrap(), "no");
        assert_eq!(llm.complete(prompt, 0, None).unwrap(), "");
        let block = VisionTokenBlock::new(256, "p").unwrap();
        llm.complete(prompt, 5, Some(&block)).unwrap();
        assert_eq!(llm.log().calls()[3].vision_payload.as_deref(), Some("p"));
    }

    #[test]
    fn random_llm_is_seeded_by_prompt() {
        let vocab = Vocabulary::full_product(["cut", "pour"], ["milk", "tomato"]).unwrap();
        let llm = RandomLlm::new(&vocab, 5, 7);
        let a = llm.complete("p", 512, None).unwrap();
        assert_eq!(a, llm.complete("p", 512, None).unwrap());
        assert_eq!(a.lines().count(), 5);
    }

    #[test]
    fn sequence_llm_repeats_last() {
        let llm = SequenceLlm::new("seq", strings(&["a", "b"]));
        let out: Vec<String> = (0..3).map(|_| llm.complete("", 9, None).unwrap()).collect();
        assert_eq!(out, ["1. a", "1. b", "1. b"]);
    }

    #[test]
    fn ground_truth_narrator() {
        let n = GroundTruthNarrator::new(vec![
            AnnotatedInterval {
                span: Span::new(0.0, 1.5).unwrap(),
                text: "A person cuts the tomato".into(),
            },
            AnnotatedInterval {
                span: Span::new(1.5, 4.0).unwrap(),
                text: "A person tears the basil".into(),
            },
        ]);
        let clip =
            VideoSegment::new(Span::new(0.0, 2.0).unwrap(), vec![FrameRef::at("f0", 0.0)]).unwrap();
        let out = n.narrate(&clip, 10).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out
            .iter()
            .all(|x| x.text == "A person cuts the tomato" && x.span == clip.span));
        assert_eq!(n.narrate(&clip, 1).unwrap().len(), 1);
        assert!(n.narrate(&clip, 0).is_err());
        let empty = VideoSegment::new(Span::new(3.0, 3.0).unwrap(), vec![]).unwrap();
        assert!(matches!(
            n.narrate(&empty, 1),
            Err(ProviderError::Argument(_))
        ));
        let strict = n.clone().with_min_clip(2.5);
        assert!(matches!(
            strict.narrate(&clip, 1),
            Err(ProviderError::ClipTooShort { .. })
        ));
        let far = VideoSegment::new(Span::new(10.0, 12.0).unwrap(), vec![]).unwrap();
        assert_eq!(n.narrate(&far, 1).unwrap()[0].text, IDLE_NARRATION);
    }

    #[test]
    fn stub_vision_encoder() {
        let enc = StubVisionEncoder::default();
        let seg =
            VideoSegment::new(Span::new(0.0, 2.0).unwrap(), vec![FrameRef::at("a", 1.0)]).unwrap();
        let b1 = enc.encode(std::slice::from_ref(&seg)).unwrap();
        assert_eq!(b1.token_count, 256);
        assert_eq!(b1, enc.encode(&[seg]).unwrap());
        assert!(enc.encode(&[]).is_err());
        assert!(UnavailableVisionEncoder
            .encode(&[])
            .unwrap_err()
            .to_string()
            .contains("Socratic"));
    }
}
