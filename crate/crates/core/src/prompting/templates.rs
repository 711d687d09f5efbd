//! Prompt templates.
//!
//! Anticipation and planning prompts share one layout: a task description,
//! one block per retrieved example, and the current-video block ending in a
//! continuation cue. Items are indented by four spaces, blocks are separated
//! by one blank line, and the text has no trailing newline.

use super::{AssembledPrompt, PromptError, PromptExample};
use crate::providers::{Tokenizer, WordTokenizer};
use crate::types::{Task, VisualHistory};

pub const EXAMPLE_HEADER: &str = "#Prompt example {i} from training set:";
pub const QUERY_HEADER: &str = "#Visual history from current video:";
const INDENT: &str = "    ";

pub const LTA_TASK: &str = "The following are numbered narrations of what a person did in videos \
from the training set, followed by the visual history of the current video. Predict the next {Z} \
actions the person will take in the current video. Continue the numbered list with one action per line.";

pub const VPA_TASK: &str = "The following are numbered steps people took to complete tasks in \
videos from the training set, followed by the steps observed so far in the current video. Predict \
the next {Z} steps needed to complete the task in the current video. Continue the numbered list \
with one step per line.";

/// Used by the vision-conditioned model when no text history is given.
pub const NO_TEXT_HISTORY_PROMPT: &str = "Predict the next {Z} actions in the form of (verb,noun)";

const SUMMARIZE_TEMPLATE: &str = include_str!("../../templates/summarize.txt");
const GOAL_TEMPLATE: &str = include_str!("../../templates/goal.txt");

/// The cue that ends the summarisation prompt.
pub const SUMMARY_CUE: &str = "1. A Person ";

pub fn task_description(task: Task, z: usize) -> String {
    let raw = match task {
        Task::Lta => LTA_TASK,
        Task::Vpa => VPA_TASK,
    };
    raw.replace("{Z}", &z.to_string())
}

pub fn no_text_history_prompt(z: usize) -> String {
    NO_TEXT_HISTORY_PROMPT.replace("{Z}", &z.to_string())
}

/// A prompt split into the pieces budget fitting works on. Examples are in
/// retrieval order, most similar first.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptParts {
    pub task: String,
    /// `(example_id, goal line, item lines)`.
    pub examples: Vec<(String, Option<String>, Vec<String>)>,
    pub goal: Option<String>,
    pub history: Vec<String>,
}

fn push_items(out: &mut String, goal: Option<&str>, items: &[String]) {
    if let Some(g) = goal {
        out.push_str(&format!("\n{INDENT}Goal: {g}"));
    }
    for (i, item) in items.iter().enumerate() {
        out.push_str(&format!("\n{INDENT}{}. {item}", i + 1));
    }
}

impl PromptParts {
    /// Number of the continuation cue: one past the last history line.
    pub fn cue_number(&self) -> usize {
        self.history.len() + 1
    }

    pub fn cue(&self) -> String {
        format!("{}.", self.cue_number())
    }

    /// Renders with the first `n_examples` examples.
    pub fn render(&self, n_examples: usize) -> String {
        let mut out = self.task.clone();
        for (i, (_, goal, items)) in self.examples.iter().take(n_examples).enumerate() {
            out.push('\n');
            out.push_str(&EXAMPLE_HEADER.replace("{i}", &(i + 1).to_string()));
            push_items(&mut out, goal.as_deref(), items);
            out.push('\n');
        }
        out.push('\n');
        out.push_str(QUERY_HEADER);
        push_items(&mut out, self.goal.as_deref(), &self.history);
        out.push_str(&format!("\n{INDENT}{}", self.cue()));
        out
    }

    /// Assembles with every example and no budget check.
    pub fn assemble_all(&self, tokenizer: &dyn Tokenizer) -> AssembledPrompt {
        self.assemble(self.examples.len(), tokenizer, 0)
    }

    pub fn assemble(
        &self,
        n_examples: usize,
        tokenizer: &dyn Tokenizer,
        reserved: usize,
    ) -> AssembledPrompt {
        let n = n_examples.min(self.examples.len());
        let text = self.render(n);
        AssembledPrompt {
            token_count: tokenizer.count(&text),
            text,
            examples_used: self.examples[..n]
                .iter()
                .map(|(id, _, _)| id.clone())
                .collect(),
            reserved_vision_tokens: reserved,
            cue: Some(self.cue()),
        }
    }
}

fn example_parts(
    examples: &[PromptExample],
    with_goal: bool,
) -> Vec<(String, Option<String>, Vec<String>)> {
    examples
        .iter()
        .map(|e| {
            (
                e.example_id.clone(),
                if with_goal { e.goal.clone() } else { None },
                e.narrations.clone(),
            )
        })
        .collect()
}

pub fn lta_parts(examples: &[PromptExample], history: &[String], z: usize) -> PromptParts {
    PromptParts {
        task: task_description(Task::Lta, z),
        examples: example_parts(examples, false),
        goal: None,
        history: history.to_vec(),
    }
}

/// With `goal_conditioning` off every Goal line is omitted and `goal` is
/// ignored.
pub fn vpa_parts(
    goal: Option<&str>,
    examples: &[PromptExample],
    history: &[String],
    z: usize,
    goal_conditioning: bool,
) -> Result<PromptParts, PromptError> {
    let goal = if goal_conditioning {
        match goal.map(str::trim) {
            Some(g) if !g.is_empty() => Some(g.to_string()),
            _ => return Err(PromptError::MissingGoal),
        }
    } else {
        None
    };
    Ok(PromptParts {
        task: task_description(Task::Vpa, z),
        examples: example_parts(examples, goal_conditioning),
        goal,
        history: history.to_vec(),
    })
}

pub fn build_lta_prompt(
    examples: &[PromptExample],
    history: &VisualHistory,
    z: usize,
) -> Result<AssembledPrompt, PromptError> {
    if history.narrations.is_empty() {
        return Err(PromptError::EmptyHistory);
    }
    Ok(lta_parts(examples, &history.narration_texts(), z).assemble_all(&WordTokenizer))
}

pub fn build_vpa_prompt(
    goal: &str,
    examples: &[PromptExample],
    history: &VisualHistory,
    z: usize,
    goal_conditioning: bool,
) -> Result<AssembledPrompt, PromptError> {
    Ok(vpa_parts(
        Some(goal),
        examples,
        &history.narration_texts(),
        z,
        goal_conditioning,
    )?
    .assemble_all(&WordTokenizer))
}

fn numbered_list(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {t}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Goal-conditioned summarisation prompt; the narration list is numbered
/// from 1.
pub fn render_summarization_prompt(goal: &str, narrations: &[String]) -> String {
    SUMMARIZE_TEMPLATE
        .replace("[goal]", goal.trim())
        .replace("[narration history]", &numbered_list(narrations))
}

pub fn render_goal_prompt(narrations: &[String]) -> String {
    GOAL_TEMPLATE.replace("[Narration History]", &numbered_list(narrations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Narration, NarrationSource, Span};

    fn history(texts: &[&str]) -> VisualHistory {
        VisualHistory::from_narrations(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    Narration::new(
                        *t,
                        Span::new(i as f64, i as f64 + 1.0).unwrap(),
                        NarrationSource::GroundTruth,
                    )
                    .unwrap()
                })
                .collect(),
        )
    }

    fn example(id: &str, goal: &str, items: &[&str]) -> PromptExample {
        PromptExample::new(
            id,
            items.iter().map(|s| s.to_string()).collect(),
            Some(goal.to_string()),
        )
    }

    #[test]
    fn lta_layout() {
        let p = build_lta_prompt(
            &[example("e1", "g", &["open fridge", "take milk"])],
            &history(&["take cup"]),
            5,
        )
        .unwrap();
        let expected = format!(
            "{}\n#Prompt example 1 from training set:\n    1. open fridge\n    2. take milk\n\n\
#Visual history from current video:\n    1. take cup\n    2.",
            task_description(Task::Lta, 5)
        );
        assert_eq!(p.text, expected);
        assert_eq!(p.examples_used, ["e1"]);
        assert_eq!(p.cue.as_deref(), Some("2."));
    }

    #[test]
    fn lta_without_examples() {
        let p = build_lta_prompt(&[], &history(&["a", "b"]), 20).unwrap();
        assert_eq!(
            p.text,
            format!(
                "{}\n#Visual history from current video:\n    1. a\n    2. b\n    3.",
                task_description(Task::Lta, 20)
            )
        );
        assert!(build_lta_prompt(&[], &history(&[]), 20).is_err());
    }

    #[test]
    fn vpa_goal_toggle_only_removes_goal_lines() {
        let ex = [example("e1", "Make pancakes", &["add flour", "add egg"])];
        let h = history(&["get cup"]);
        let on = build_vpa_prompt("Make a latte", &ex, &h, 3, true).unwrap();
        let off = build_vpa_prompt("Make a latte", &ex, &h, 3, false).unwrap();
        assert!(on.text.contains("\n    Goal: Make a latte\n    1. get cup"));
        assert!(on.text.contains("\n    Goal: Make pancakes\n"));
        let stripped: Vec<&str> = on
            .text
            .lines()
            .filter(|l| !l.trim_start().starts_with("Goal:"))
            .collect();
        assert_eq!(stripped.join("\n"), off.text);
        assert!(matches!(
            build_vpa_prompt("  ", &ex, &h, 3, true),
            Err(PromptError::MissingGoal)
        ));
        assert!(build_vpa_prompt("", &ex, &h, 3, false).is_ok());
    }

    #[test]
    fn summarization_prompt_interpolates() {
        let p = render_summarization_prompt("make a latte", &["a".into(), "b".into()]);
        assert!(p.starts_with("A person is currently attempting to \nmake a latte. Their task"));
        assert!(p.contains("their actions.\n\n1. a\n2. b\n\nPlease summarize"));
        assert!(p.ends_with(SUMMARY_CUE));
    }

    #[test]
    fn goal_prompt_interpolates() {
        let p = render_goal_prompt(&["x".into()]);
        assert!(p.starts_with(
            "The user took these physical actions:\n1. x\n\nWhat are the top 3 goals"
        ));
        assert!(p.trim_end().ends_with("and its confidence."));
    }
}
