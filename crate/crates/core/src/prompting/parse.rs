//! Completion parsing: only numbered lines are kept.

use std::sync::OnceLock;

use regex::Regex;

use super::templates::QUERY_HEADER;

fn numbered() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+\.(?:\s+(.*)|\s*)$").expect("valid regex"))
}

fn numbered_item(line: &str) -> Option<&str> {
    numbered()
        .captures(line)
        .map(|c| c.get(1).map_or("", |m| m.as_str()).trim())
}

/// Items of every line that starts with `digits.`, prefix stripped, order
/// kept. Lines with nothing after the number are dropped.
pub fn parse_completion(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(numbered_item)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses a completion of a prompt that ended with a continuation cue (for
/// example `9.`). Models usually continue the cue line directly, so when the
/// first non-empty line carries no number the cue is put back in front.
pub fn parse_continuation(completion: &str, cue: Option<&str>) -> Vec<String> {
    let Some(cue) = cue else {
        return parse_completion(completion);
    };
    let first = completion.lines().find(|l| !l.trim().is_empty());
    match first {
        Some(line) if numbered_item(line).is_none() => {
            let text = format!("{} {}", cue.trim_end(), completion.trim_start());
            parse_completion(&text)
        }
        _ => parse_completion(completion),
    }
}

/// Numbered items under the last current-video header of an assembled
/// prompt, excluding the trailing cue. Goal lines are skipped.
pub fn query_history(prompt: &str) -> Vec<String> {
    let Some(pos) = prompt.rfind(QUERY_HEADER) else {
        return Vec::new();
    };
    parse_completion(&prompt[pos + QUERY_HEADER.len()..])
}
