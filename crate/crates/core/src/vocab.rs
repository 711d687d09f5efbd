//! Closed verb/noun/action prediction space and its JSON file format:
//! `{"verbs": [...], "nouns": [...], "actions": [[verb_index, noun_index], ...]}`.
//!
//! Terms are lowercased and trimmed on load. Indices are 0-based.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::ActionLabel;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema violation at `{field}`{}: {message}", line_suffix(*line))]
    Schema {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("duplicate {kind} term `{term}`{}", line_suffix(*line))]
    Duplicate {
        kind: &'static str,
        term: String,
        line: Option<usize>,
    },
    #[error("action {position} = [{verb}, {noun}] is out of range ({verbs} verbs, {nouns} nouns){}", line_suffix(*line))]
    IndexOutOfRange {
        position: usize,
        verb: usize,
        noun: usize,
        verbs: usize,
        nouns: usize,
        line: Option<usize>,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    verbs: Vec<String>,
    nouns: Vec<String>,
    actions: BTreeSet<(usize, usize)>,
    verb_lookup: HashMap<String, usize>,
    noun_lookup: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    verbs: Vec<String>,
    nouns: Vec<String>,
    actions: Vec<[usize; 2]>,
}

pub fn normalize_term(term: &str) -> String {
    term.trim().to_lowercase()
}

impl Vocabulary {
    pub fn new<V, N>(verbs: V, nouns: N, actions: &[(usize, usize)]) -> Result<Self, VocabError>
    where
        V: IntoIterator,
        V::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        Self::build(
            verbs.into_iter().map(|v| v.as_ref().to_string()).collect(),
            nouns.into_iter().map(|n| n.as_ref().to_string()).collect(),
            actions,
            None,
        )
    }

    /// Every verb paired with every noun.
    pub fn full_product<V, N>(verbs: V, nouns: N) -> Result<Self, VocabError>
    where
        V: IntoIterator,
        V::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        let verbs: Vec<String> = verbs.into_iter().map(|v| v.as_ref().to_string()).collect();
        let nouns: Vec<String> = nouns.into_iter().map(|n| n.as_ref().to_string()).collect();
        let actions: Vec<(usize, usize)> = (0..verbs.len())
            .flat_map(|v| (0..nouns.len()).map(move |n| (v, n)))
            .collect();
        Self::build(verbs, nouns, &actions, None)
    }

    fn build(
        verbs: Vec<String>,
        nouns: Vec<String>,
        actions: &[(usize, usize)],
        raw: Option<&str>,
    ) -> Result<Self, VocabError> {
        let verbs: Vec<String> = verbs.iter().map(|v| normalize_term(v)).collect();
        let nouns: Vec<String> = nouns.iter().map(|n| normalize_term(n)).collect();
        let verb_lookup = index_terms("verb", &verbs, raw)?;
        let noun_lookup = index_terms("noun", &nouns, raw)?;
        if actions.is_empty() {
            return Err(VocabError::Schema {
                field: "actions".into(),
                line: None,
                message: "must list at least one feasible action".into(),
            });
        }
        let mut set = BTreeSet::new();
        for (position, &(verb, noun)) in actions.iter().enumerate() {
            if verb >= verbs.len() || noun >= nouns.len() {
                let line = raw.and_then(|r| {
                    let re = Regex::new(&format!(r"\[\s*{verb}\s*,\s*{noun}\s*\]")).ok()?;
                    re.find(r).map(|m| line_of_offset(r, m.start()))
                });
                return Err(VocabError::IndexOutOfRange {
                    position,
                    verb,
                    noun,
                    verbs: verbs.len(),
                    nouns: nouns.len(),
                    line,
                });
            }
            set.insert((verb, noun));
        }
        Ok(Self {
            verbs,
            nouns,
            actions: set,
            verb_lookup,
            noun_lookup,
        })
    }

    pub fn from_json_str(raw: &str) -> Result<Self, VocabError> {
        let file: VocabFile = serde_json::from_str(raw).map_err(|e| VocabError::Schema {
            field: schema_field(&e),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let actions: Vec<(usize, usize)> = file.actions.iter().map(|a| (a[0], a[1])).collect();
        Self::build(file.verbs, file.nouns, &actions, Some(raw))
    }

    pub fn to_json_string(&self) -> String {
        let file = VocabFile {
            verbs: self.verbs.clone(),
            nouns: self.nouns.clone(),
            actions: self.actions.iter().map(|&(v, n)| [v, n]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serialises")
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns
    }

    pub fn actions(&self) -> &BTreeSet<(usize, usize)> {
        &self.actions
    }

    pub fn is_feasible(&self, verb: usize, noun: usize) -> bool {
        self.actions.contains(&(verb, noun))
    }

    pub fn verb_index(&self, term: &str) -> Option<usize> {
        self.verb_lookup.get(&normalize_term(term)).copied()
    }

    pub fn noun_index(&self, term: &str) -> Option<usize> {
        self.noun_lookup.get(&normalize_term(term)).copied()
    }

    /// Label for a pair of indices; `None` if either is out of range.
    pub fn label(&self, verb: usize, noun: usize) -> Option<ActionLabel> {
        Some(ActionLabel::new(
            verb,
            noun,
            self.verbs.get(verb)?.clone(),
            self.nouns.get(noun)?.clone(),
        ))
    }

    pub fn label_for(&self, verb: &str, noun: &str) -> Option<ActionLabel> {
        self.label(self.verb_index(verb)?, self.noun_index(noun)?)
    }

    /// Feasible actions as labels, in index order.
    pub fn feasible_labels(&self) -> Vec<ActionLabel> {
        self.actions
            .iter()
            .filter_map(|&(v, n)| self.label(v, n))
            .collect()
    }
}

fn index_terms(
    kind: &'static str,
    terms: &[String],
    raw: Option<&str>,
) -> Result<HashMap<String, usize>, VocabError> {
    let field = if kind == "verb" { "verbs" } else { "nouns" };
    if terms.is_empty() {
        return Err(VocabError::Schema {
            field: field.into(),
            line: None,
            message: "must be non-empty".into(),
        });
    }
    let mut lookup = HashMap::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        if t.is_empty() {
            return Err(VocabError::Schema {
                field: format!("{field}[{i}]"),
                line: None,
                message: "empty term".into(),
            });
        }
        if lookup.insert(t.clone(), i).is_some() {
            let line = raw.and_then(|r| {
                let needle = format!("\"{t}\"");
                r.match_indices(&needle)
                    .nth(1)
                    .map(|(off, _)| line_of_offset(r, off))
            });
            return Err(VocabError::Duplicate {
                kind,
                term: t.clone(),
                line,
            });
        }
    }
    Ok(lookup)
}

fn line_of_offset(raw: &str, offset: usize) -> usize {
    raw[..offset].bytes().filter(|&b| b == b'\n').count() + 1
}

fn schema_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    Regex::new(r"field `(\w+)`")
        .ok()
        .and_then(|re| re.captures(&msg).map(|c| c[1].to_string()))
        .unwrap_or_else(|| "<root>".into())
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary, VocabError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| VocabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Vocabulary::from_json_str(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_vocabulary() {
        let v =
            Vocabulary::from_json_str(r#"{"verbs":["cut"],"nouns":["tomato"],"actions":[[0,0]]}"#)
                .unwrap();
        assert_eq!(
            (v.verbs().len(), v.nouns().len(), v.actions().len()),
            (1, 1, 1)
        );
        assert_eq!(v.label(0, 0).unwrap().phrase(), "cut tomato");
    }

    #[test]
    fn out_of_range_pair_reports_line() {
        let raw = "{\n\"verbs\":[\"cut\"],\n\"nouns\":[\"a\",\"b\",\"c\"],\n\"actions\":[[0,0],\n [0, 5]]\n}";
        match Vocabulary::from_json_str(raw) {
            Err(VocabError::IndexOutOfRange {
                position,
                noun,
                line,
                ..
            }) => {
                assert_eq!(position, 1);
                assert_eq!(noun, 5);
                assert_eq!(line, Some(5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_after_normalisation_are_rejected() {
        let raw = "{\"verbs\":[\"Cut\",\n\" cut \"],\"nouns\":[\"x\"],\"actions\":[[0,0]]}";
        match Vocabulary::from_json_str(raw) {
            Err(VocabError::Duplicate { kind, term, .. }) => {
                assert_eq!(kind, "verb");
                assert_eq!(term, "cut");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_field_and_line() {
        let raw = "{\n\"verbs\": [\"cut\"],\n\"nouns\": [\"x\"]\n}";
        match Vocabulary::from_json_str(raw) {
            Err(VocabError::Schema { field, line, .. }) => {
                assert_eq!(field, "actions");
                assert!(line.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Vocabulary::from_json_str(r#"{"verbs":[],"nouns":["x"],"actions":[[0,0]]}"#),
            Err(VocabError::Schema { .. })
        ));
    }

    #[test]
    fn full_scale_vocabulary() {
        let verbs: Vec<String> = (0..115).map(|i| format!("verb{i}")).collect();
        let nouns: Vec<String> = (0..478).map(|i| format!("noun{i}")).collect();
        let actions: Vec<(usize, usize)> = (0..3542).map(|i| (i % 115, (i * 7) % 478)).collect();
        let v = Vocabulary::new(&verbs, &nouns, &actions).unwrap();
        assert_eq!(v.verbs().len(), 115);
        assert_eq!(v.nouns().len(), 478);
        let distinct: BTreeSet<_> = actions.iter().collect();
        assert_eq!(v.actions().len(), distinct.len());
        let back = Vocabulary::from_json_str(&v.to_json_string()).unwrap();
        assert_eq!(back, v);
    }

    proptest! {
        #[test]
        fn json_round_trip(
            nv in 1usize..6,
            nn in 1usize..6,
            pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..12),
        ) {
            let verbs: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
            let nouns: Vec<String> = (0..nn).map(|i| format!("n{i}")).collect();
            let actions: Vec<(usize, usize)> = pairs.into_iter().map(|(v, n)| (v % nv, n % nn)).collect();
            let vocab = Vocabulary::new(&verbs, &nouns, &actions).unwrap();
            let back = Vocabulary::from_json_str(&vocab.to_json_string()).unwrap();
            prop_assert_eq!(back, vocab);
        }
    }
}
