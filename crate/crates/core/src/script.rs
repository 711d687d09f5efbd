//! Scripted multi-step activities.
//!
//! A script lists steps in their intended order, precedence edges between
//! them, and a 1-based `assist_boundary`: steps `1..=assist_boundary` are done
//! by the user unassisted, the rest are guided by the assistant. `n_eval`
//! counts the non-optional guided steps.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("script schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("script `{0}` has no assist_boundary")]
    MissingBoundary(String),
    #[error("assist_boundary {boundary} must lie in [1, {max}]")]
    BoundaryOutOfRange { boundary: usize, max: usize },
    #[error("script has no non-optional steps after the assist boundary")]
    NoEvalSteps,
    #[error("duplicate step id `{0}`")]
    DuplicateStep(String),
    #[error("precedence edge references unknown step `{0}`")]
    UnknownStep(String),
    #[error("precedence cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown bundled script `{0}`")]
    UnknownBundled(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub step_id: String,
    pub description: String,
    #[serde(default)]
    pub canonical_phrases: Vec<String>,
    #[serde(default)]
    pub optional: bool,
}

impl ScriptStep {
    /// Canonical phrases, falling back to the description.
    pub fn phrases(&self) -> Vec<&str> {
        if self.canonical_phrases.is_empty() {
            vec![self.description.as_str()]
        } else {
            self.canonical_phrases.iter().map(String::as_str).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScriptFile {
    script_id: String,
    title: String,
    goal_text: String,
    steps: Vec<ScriptStep>,
    #[serde(default)]
    precedence: Vec<(String, String)>,
    assist_boundary: Option<usize>,
    #[serde(default)]
    out_of_variant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScriptFile", into = "ScriptFile")]
pub struct ActivityScript {
    pub script_id: String,
    pub title: String,
    pub goal_text: String,
    pub steps: Vec<ScriptStep>,
    pub precedence: Vec<(String, String)>,
    pub assist_boundary: usize,
    /// Actions that belong to other variants of the activity and cannot be
    /// done in this setting (e.g. grinding beans with an automatic machine).
    pub out_of_variant: Vec<String>,
    pub n_eval: usize,
}

impl From<ActivityScript> for ScriptFile {
    fn from(s: ActivityScript) -> Self {
        Self {
            script_id: s.script_id,
            title: s.title,
            goal_text: s.goal_text,
            steps: s.steps,
            precedence: s.precedence,
            assist_boundary: Some(s.assist_boundary),
            out_of_variant: s.out_of_variant,
        }
    }
}

impl TryFrom<ScriptFile> for ActivityScript {
    type Error = ScriptError;

    fn try_from(f: ScriptFile) -> Result<Self, Self::Error> {
        let boundary = f
            .assist_boundary
            .ok_or_else(|| ScriptError::MissingBoundary(f.script_id.clone()))?;
        let max = f.steps.len().saturating_sub(1);
        if boundary < 1 || boundary > max {
            return Err(ScriptError::BoundaryOutOfRange { boundary, max });
        }
        let mut seen = HashSet::new();
        for s in &f.steps {
            if !seen.insert(s.step_id.as_str()) {
                return Err(ScriptError::DuplicateStep(s.step_id.clone()));
            }
        }
        for (a, b) in &f.precedence {
            for id in [a, b] {
                if !seen.contains(id.as_str()) {
                    return Err(ScriptError::UnknownStep(id.clone()));
                }
            }
        }
        let n_eval = f.steps[boundary..].iter().filter(|s| !s.optional).count();
        if n_eval == 0 {
            return Err(ScriptError::NoEvalSteps);
        }
        let script = ActivityScript {
            script_id: f.script_id,
            title: f.title,
            goal_text: f.goal_text,
            steps: f.steps,
            precedence: f.precedence,
            assist_boundary: boundary,
            out_of_variant: f.out_of_variant,
            n_eval,
        };
        if let Some(cycle) = script.find_cycle() {
            return Err(ScriptError::Cycle(cycle));
        }
        Ok(script)
    }
}

impl ActivityScript {
    pub fn from_json_str(raw: &str) -> Result<Self, ScriptError> {
        // Deserialise the raw file first so semantic errors keep their type.
        let file: ScriptFile = serde_json::from_str(raw)?;
        ActivityScript::try_from(file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serialises")
    }

    /// Executed-action cap for a session: `n_eval + 2`.
    pub fn step_cap(&self) -> usize {
        self.n_eval + 2
    }

    pub fn step(&self, step_id: &str) -> Option<&ScriptStep> {
        self.steps.iter().find(|s| s.step_id == step_id)
    }

    pub fn position(&self, step_id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.step_id == step_id)
    }

    /// Steps the user completes before requesting assistance.
    pub fn partial_progress_steps(&self) -> &[ScriptStep] {
        &self.steps[..self.assist_boundary]
    }

    /// Steps after the boundary, optional ones included.
    pub fn assistance_steps(&self) -> &[ScriptStep] {
        &self.steps[self.assist_boundary..]
    }

    /// Ids of the non-optional steps after the boundary.
    pub fn eval_step_ids(&self) -> Vec<&str> {
        self.assistance_steps()
            .iter()
            .filter(|s| !s.optional)
            .map(|s| s.step_id.as_str())
            .collect()
    }

    pub fn required_step_ids(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter(|s| !s.optional)
            .map(|s| s.step_id.as_str())
            .collect()
    }

    pub fn predecessors(&self, step_id: &str) -> Vec<&str> {
        self.precedence
            .iter()
            .filter(|(_, after)| after == step_id)
            .map(|(before, _)| before.as_str())
            .collect()
    }

    /// All direct predecessors are in `done`.
    pub fn precedence_satisfied(&self, step_id: &str, done: &HashSet<String>) -> bool {
        self.predecessors(step_id).iter().all(|p| done.contains(*p))
    }

    /// Kahn's algorithm, ties broken by listed order.
    pub fn topological_order(&self) -> Vec<&str> {
        let mut indegree: BTreeMap<usize, usize> = (0..self.steps.len()).map(|i| (i, 0)).collect();
        let pos: HashMap<&str, usize> = self
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| (s.step_id.as_str(), i))
            .collect();
        for (_, after) in &self.precedence {
            *indegree.get_mut(&pos[after.as_str()]).unwrap() += 1;
        }
        let mut out = Vec::with_capacity(self.steps.len());
        let mut done = vec![false; self.steps.len()];
        while out.len() < self.steps.len() {
            let Some(next) = (0..self.steps.len()).find(|i| !done[*i] && indegree[i] == 0) else {
                break;
            };
            done[next] = true;
            let id = self.steps[next].step_id.as_str();
            out.push(id);
            for (before, after) in &self.precedence {
                if before == id {
                    *indegree.get_mut(&pos[after.as_str()]).unwrap() -= 1;
                }
            }
        }
        out
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Unvisited,
            OnStack,
            Done,
        }
        let ids: Vec<&str> = self.steps.iter().map(|s| s.step_id.as_str()).collect();
        let mut marks: HashMap<&str, Mark> = ids.iter().map(|id| (*id, Mark::Unvisited)).collect();

        fn visit<'a>(
            node: &'a str,
            script: &'a ActivityScript,
            marks: &mut HashMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            marks.insert(node, Mark::OnStack);
            stack.push(node);
            for (before, after) in &script.precedence {
                if before != node {
                    continue;
                }
                match marks[after.as_str()] {
                    Mark::OnStack => {
                        let start = stack.iter().position(|s| *s == after).unwrap();
                        let mut cycle: Vec<String> =
                            stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(after.clone());
                        return Some(cycle);
                    }
                    Mark::Unvisited => {
                        if let Some(c) = visit(after, script, marks, stack) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            stack.pop();
            marks.insert(node, Mark::Done);
            None
        }

        for id in ids {
            if marks[id] == Mark::Unvisited {
                let mut stack = Vec::new();
                if let Some(c) = visit(id, self, &mut marks, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }
}

pub fn load_script(path: impl AsRef<Path>) -> Result<ActivityScript, ScriptError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ActivityScript::from_json_str(&raw)
}

const LATTE: &str = include_str!("../../../scripts/latte.json");
const CAPRESE: &str = include_str!("../../../scripts/caprese.json");
const BLT: &str = include_str!("../../../scripts/blt.json");

pub const BUNDLED_SCRIPT_IDS: [&str; 3] = ["latte", "caprese", "blt"];

/// One of the three bundled study activities by id.
pub fn bundled_script(script_id: &str) -> Result<ActivityScript, ScriptError> {
    let raw = match script_id {
        "latte" => LATTE,
        "caprese" => CAPRESE,
        "blt" => BLT,
        other => return Err(ScriptError::UnknownBundled(other.to_string())),
    };
    ActivityScript::from_json_str(raw)
}

pub fn bundled_scripts() -> Vec<ActivityScript> {
    BUNDLED_SCRIPT_IDS
        .iter()
        .map(|id| bundled_script(id).expect("bundled scripts are valid"))
        .collect()
}

/// The bundled scripts plus every `*.json` script in `extra`; a file whose
/// id matches a bundled script replaces it. Sorted by id.
pub fn script_catalog(extra: Option<&Path>) -> Result<Vec<ActivityScript>, ScriptError> {
    let mut by_id: BTreeMap<String, ActivityScript> = bundled_scripts()
        .into_iter()
        .map(|s| (s.script_id.clone(), s))
        .collect();
    if let Some(dir) = extra {
        let io = |source| ScriptError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io)?;
        paths.sort();
        for p in paths
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
        {
            let s = load_script(&p)?;
            by_id.insert(s.script_id.clone(), s);
        }
    }
    Ok(by_id.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step(precedence: &str) -> String {
        format!(
            r#"{{"script_id":"t","title":"t","goal_text":"g",
            "steps":[{{"step_id":"s1","description":"a"}},{{"step_id":"s2","description":"b"}}],
            "precedence":{precedence},"assist_boundary":1}}"#
        )
    }

    #[test]
    fn bundled_latte() {
        let s = bundled_script("latte").unwrap();
        assert_eq!(s.steps.len(), 5);
        assert_eq!(s.assist_boundary, 3);
        assert_eq!(s.n_eval, 2);
        assert_eq!(s.step_cap(), 4);
        assert_eq!(s.steps[3].description, "Froth milk using the steam wand");
    }

    #[test]
    fn bundled_caprese_and_blt() {
        let c = bundled_script("caprese").unwrap();
        assert_eq!((c.steps.len(), c.assist_boundary, c.n_eval), (7, 4, 3));
        assert_eq!(
            c.steps[4].description,
            "Arrange the mozzarella slices on the plate"
        );
        let b = bundled_script("blt").unwrap();
        assert_eq!((b.steps.len(), b.assist_boundary, b.n_eval), (8, 5, 3));
    }

    #[test]
    fn bundled_listed_order_is_topological() {
        for s in bundled_scripts() {
            let listed: Vec<&str> = s.steps.iter().map(|x| x.step_id.as_str()).collect();
            assert_eq!(s.topological_order(), listed, "{}", s.script_id);
        }
    }

    #[test]
    fn cycle_is_reported_with_path() {
        let err =
            ActivityScript::from_json_str(&two_step(r#"[["s2","s1"],["s1","s2"]]"#)).unwrap_err();
        match err {
            ScriptError::Cycle(path) => {
                assert_eq!(path.first(), path.last());
                assert_eq!(path.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boundary_errors() {
        let raw = two_step("[]").replace(r#","assist_boundary":1"#, "");
        assert!(matches!(
            ActivityScript::from_json_str(&raw),
            Err(ScriptError::MissingBoundary(_))
        ));
        let raw = two_step("[]").replace(r#""assist_boundary":1"#, r#""assist_boundary":2"#);
        assert!(matches!(
            ActivityScript::from_json_str(&raw),
            Err(ScriptError::BoundaryOutOfRange { .. })
        ));
    }

    #[test]
    fn unknown_step_in_precedence() {
        assert!(matches!(
            ActivityScript::from_json_str(&two_step(r#"[["s1","s9"]]"#)),
            Err(ScriptError::UnknownStep(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        for s in bundled_scripts() {
            let back = ActivityScript::from_json_str(&s.to_json_string()).unwrap();
            assert_eq!(back, s);
        }
    }
}
