//! Token counters used for context-budget accounting.

pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;

    fn count(&self, text: &str) -> usize;

    /// True when the count approximates an unknown model tokenizer; reports
    /// carry a flag in that case.
    fn is_heuristic(&self) -> bool {
        false
    }
}

/// One token per whitespace-separated word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

impl Tokenizer for WordTokenizer {
    fn name(&self) -> &str {
        "word"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// `ceil(chars / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicTokenizer;

impl Tokenizer for HeuristicTokenizer {
    fn name(&self) -> &str {
        "chars/4"
    }

    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }

    fn is_heuristic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(WordTokenizer.count("  one two\nthree "), 3);
        assert_eq!(WordTokenizer.count(""), 0);
        assert_eq!(HeuristicTokenizer.count("abcde"), 2);
        assert_eq!(HeuristicTokenizer.count("abcd"), 1);
        assert_eq!(HeuristicTokenizer.count(""), 0);
        assert!(HeuristicTokenizer.is_heuristic());
    }
}
