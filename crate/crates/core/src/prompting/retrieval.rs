//! Similarity-ranked selection of in-context examples.

use super::{joined, ExamplePool, PromptError, PromptExample};
use crate::providers::Embedder;

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    /// Selected examples, most similar first, with their cosine scores.
    pub examples: Vec<(PromptExample, f64)>,
    /// The history was empty, so the first `k` pool entries were taken.
    pub fallback: bool,
}

impl Retrieved {
    pub fn prompt_examples(&self) -> Vec<PromptExample> {
        self.examples.iter().map(|(e, _)| e.clone()).collect()
    }
}

/// Top-`k` pool entries by cosine between the joined history and each
/// example's embedding; ties keep pool order.
pub fn retrieve_examples(
    history: &[String],
    pool: &ExamplePool,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Retrieved, PromptError> {
    if pool.is_empty() {
        return Err(PromptError::EmptyPool);
    }
    let k = k.min(pool.len());
    if history.iter().all(|h| h.trim().is_empty()) {
        return Ok(Retrieved {
            examples: pool.examples()[..k]
                .iter()
                .map(|e| (e.clone(), 0.0))
                .collect(),
            fallback: true,
        });
    }
    let query = embedder.embed_one(&joined(history))?;
    let mut scored: Vec<(usize, f64)> = pool
        .examples()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let emb = e
                .embedding
                .as_ref()
                .expect("pool embeddings are filled on construction");
            (i, query.cosine(emb))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(Retrieved {
        examples: scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (pool.examples()[i].clone(), s))
            .collect(),
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::stub::BagOfWordsEmbedder;

    fn pool(items: &[&[&str]]) -> ExamplePool {
        let examples = items
            .iter()
            .enumerate()
            .map(|(i, n)| {
                PromptExample::new(
                    format!("e{i}"),
                    n.iter().map(|s| s.to_string()).collect(),
                    None,
                )
            })
            .collect();
        ExamplePool::new(examples, &BagOfWordsEmbedder::default()).unwrap()
    }

    fn ids(r: &Retrieved) -> Vec<&str> {
        r.examples
            .iter()
            .map(|(e, _)| e.example_id.as_str())
            .collect()
    }

    #[test]
    fn clips_to_pool_size() {
        let p = pool(&[&["cut tomato"], &["pour milk"]]);
        let r = retrieve_examples(&["cut bread".into()], &p, 8, &BagOfWordsEmbedder::default())
            .unwrap();
        assert_eq!(ids(&r), ["e0", "e1"]);
    }

    #[test]
    fn identical_history_ranks_first() {
        let p = pool(&[
            &["pour milk"],
            &["wash plate"],
            &["cut tomato", "tear basil"],
        ]);
        let h = vec!["cut tomato".to_string(), "tear basil".to_string()];
        let r = retrieve_examples(&h, &p, 1, &BagOfWordsEmbedder::default()).unwrap();
        assert_eq!(ids(&r), ["e2"]);
        assert!((r.examples[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_history_falls_back() {
        let p = pool(&[&["a b"], &["c d"], &["e f"]]);
        let r = retrieve_examples(&[], &p, 2, &BagOfWordsEmbedder::default()).unwrap();
        assert!(r.fallback);
        assert_eq!(ids(&r), ["e0", "e1"]);
        assert!(matches!(
            retrieve_examples(
                &[],
                &ExamplePool::empty(),
                2,
                &BagOfWordsEmbedder::default()
            ),
            Err(PromptError::EmptyPool)
        ));
    }
}
