//! Word splitting and the frozen stopword list.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS_RAW: &str = include_str!("../data/stopwords.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercased words split on whitespace and punctuation. Apostrophes inside
/// a word are dropped (`person's` -> `persons`).
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.replace('\'', "").to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Words with at least one letter that are not stopwords, in order.
pub fn content_words(text: &str) -> Vec<String> {
    words(text)
        .into_iter()
        .filter(|w| w.chars().any(char::is_alphabetic) && !is_stopword(w))
        .collect()
}

/// Crude suffix stripping so plural and third-person forms share a key:
/// `ies -> y`, `oes -> o`, `sses -> ss`, and a final `s` on words longer
/// than three letters.
pub fn stem(word: &str) -> String {
    if let Some(base) = word.strip_suffix("ies") {
        if base.len() > 1 {
            return format!("{base}y");
        }
    }
    if let Some(base) = word.strip_suffix("oes") {
        if base.len() > 1 {
            return format!("{base}o");
        }
    }
    if let Some(base) = word.strip_suffix("sses") {
        return format!("{base}ss");
    }
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

/// 64-bit FNV-1a, stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Removes a leading actor mention (`A person`, `The person`, `#C C`) from a
/// narration.
pub fn strip_actor(text: &str) -> &str {
    let t = text.trim_start();
    for prefix in ["a person ", "the person ", "#c c ", "person "] {
        if t.len() >= prefix.len() && t[..prefix.len()].eq_ignore_ascii_case(prefix) {
            return t[prefix.len()..].trim_start();
        }
    }
    t
}
