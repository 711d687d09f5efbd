//! Context-budget fitting.

use super::{AssembledPrompt, PromptError, PromptParts};
use crate::providers::Tokenizer;

/// Drops the lowest-ranked examples one at a time until
/// `token_count + reserved <= context_limit`. The task description and the
/// history are never dropped; if they alone do not fit, the caller has to
/// summarise the history.
pub fn fit_to_budget(
    parts: &PromptParts,
    tokenizer: &dyn Tokenizer,
    context_limit: usize,
    reserved: usize,
) -> Result<AssembledPrompt, PromptError> {
    let mut n = parts.examples.len();
    loop {
        let prompt = parts.assemble(n, tokenizer, reserved);
        if prompt.token_count + reserved <= context_limit {
            return Ok(prompt);
        }
        if n == 0 {
            return Err(PromptError::Overflow {
                tokens: prompt.token_count,
                reserved,
                limit: context_limit,
            });
        }
        n -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::templates::lta_parts;
    use crate::prompting::PromptExample;
    use crate::providers::WordTokenizer;

    fn examples(n: usize, words: usize) -> Vec<PromptExample> {
        (0..n)
            .map(|i| {
                PromptExample::new(
                    format!("e{i}"),
                    vec!["w ".repeat(words).trim().to_string()],
                    None,
                )
            })
            .collect()
    }

    #[test]
    fn everything_fits() {
        let parts = lta_parts(&examples(8, 10), &["take cup".into()], 20);
        let p = fit_to_budget(&parts, &WordTokenizer, 2048, 0).unwrap();
        assert_eq!(p.examples_used.len(), 8);
    }

    #[test]
    fn drops_lowest_ranked_first() {
        let parts = lta_parts(&examples(8, 100), &["take cup".into()], 20);
        let base = parts.assemble(0, &WordTokenizer, 0).token_count;
        // Each example adds 100 words, its header (5 words) and the item number.
        let per = parts.assemble(1, &WordTokenizer, 0).token_count - base;
        let limit = base + 5 * per;
        let p = fit_to_budget(&parts, &WordTokenizer, limit, 0).unwrap();
        assert_eq!(p.examples_used, ["e0", "e1", "e2", "e3", "e4"]);
        assert!(p.token_count <= limit);
    }

    #[test]
    fn history_overflow_is_an_error() {
        let history: Vec<String> = (0..50).map(|i| format!("step {i}")).collect();
        let parts = lta_parts(&examples(2, 5), &history, 20);
        assert!(matches!(
            fit_to_budget(&parts, &WordTokenizer, 40, 0),
            Err(PromptError::Overflow { .. })
        ));
    }

    #[test]
    fn reserved_tokens_shrink_the_example_count() {
        let parts = lta_parts(&examples(8, 235), &["take cup".into()], 20);
        let soc = fit_to_budget(&parts, &WordTokenizer, 2048, 0).unwrap();
        let vclm = fit_to_budget(&parts, &WordTokenizer, 2048, 256).unwrap();
        assert!(vclm.examples_used.len() < soc.examples_used.len());
        assert!(vclm.token_count + 256 <= 2048);
    }
}
