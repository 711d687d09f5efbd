//! Versioned prompt goldens: the fixed inputs, rendering, and byte-exact
//! comparison against the files under `goldens/`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::prompting::templates::{
    build_lta_prompt, build_vpa_prompt, render_goal_prompt, render_summarization_prompt,
};
use crate::prompting::{PromptError, PromptExample};
use crate::types::{Narration, NarrationSource, Span, VisualHistory};

pub const GOLDEN_EXTENSION: &str = "txt";

const EXAMPLES: [(&str, [&str; 8]); 8] = [
    (
        "Make a latte",
        [
            "A person takes a cup from the shelf",
            "A person places the cup under the espresso machine",
            "A person presses the brew button",
            "A person opens the fridge",
            "A person takes out the milk",
            "A person pours milk into the pitcher",
            "A person steams the milk",
            "A person pours the milk into the cup",
        ],
    ),
    (
        "Make a tomato salad",
        [
            "A person washes the tomatoes",
            "A person takes a knife",
            "A person cuts the tomato",
            "A person puts the slices in a bowl",
            "A person peels the onion",
            "A person cuts the onion",
            "A person adds the onion to the bowl",
            "A person pours oil over the salad",
        ],
    ),
    (
        "Make scrambled eggs",
        [
            "A person takes a pan",
            "A person puts the pan on the stove",
            "A person turns on the stove",
            "A person cracks an egg into a bowl",
            "A person cracks another egg",
            "A person stirs the eggs",
            "A person pours the eggs into the pan",
            "A person stirs the pan",
        ],
    ),
    (
        "Make a sandwich",
        [
            "A person takes two slices of bread",
            "A person opens the butter",
            "A person spreads butter on the bread",
            "A person washes the lettuce",
            "A person places lettuce on the bread",
            "A person cuts the cheese",
            "A person places cheese on the lettuce",
            "A person closes the sandwich",
        ],
    ),
    (
        "Make pancakes",
        [
            "A person takes a bowl",
            "A person pours flour into the bowl",
            "A person cracks an egg into the bowl",
            "A person pours milk into the bowl",
            "A person whisks the batter",
            "A person heats the pan",
            "A person pours batter into the pan",
            "A person flips the pancake",
        ],
    ),
    (
        "Make tea",
        [
            "A person fills the kettle with water",
            "A person turns on the kettle",
            "A person takes a mug",
            "A person puts a tea bag in the mug",
            "A person pours hot water into the mug",
            "A person waits for the tea",
            "A person removes the tea bag",
            "A person adds sugar to the mug",
        ],
    ),
    (
        "Make onion soup",
        [
            "A person peels the onions",
            "A person slices the onions",
            "A person melts butter in the pot",
            "A person adds the onions to the pot",
            "A person stirs the onions",
            "A person pours stock into the pot",
            "A person covers the pot",
            "A person tastes the soup",
        ],
    ),
    (
        "Make a smoothie",
        [
            "A person peels a banana",
            "A person puts the banana in the blender",
            "A person washes the berries",
            "A person adds the berries to the blender",
            "A person pours milk into the blender",
            "A person closes the blender lid",
            "A person turns on the blender",
            "A person pours the smoothie into a glass",
        ],
    ),
];

const HISTORY: [&str; 8] = [
    "A person opens the cupboard",
    "A person takes out a mug",
    "A person places the mug on the counter",
    "A person opens the coffee tin",
    "A person scoops coffee into the filter",
    "A person fills the machine with water",
    "A person turns on the coffee machine",
    "A person opens the fridge",
];

const SUMMARY_NARRATIONS: [&str; 12] = [
    "A person takes a cup",
    "A person holds the cup",
    "A person places the cup on the tray",
    "A person places the cup on the tray",
    "A person presses a button on the machine",
    "A person presses the button",
    "A person waits by the espresso machine",
    "A person opens the fridge",
    "A person takes the milk carton",
    "A person pours milk into a pitcher",
    "A person pours milk into the pitcher",
    "A person holds the pitcher",
];

const CAPRESE_GOAL: &str = "make Caprese salad with mozzarella, tomato, basil, olive oil";

/// One golden file: its name (without extension) and expected contents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenCase {
    pub name: String,
    pub text: String,
}

fn examples(with_goals: bool) -> Vec<PromptExample> {
    EXAMPLES
        .iter()
        .enumerate()
        .map(|(i, (goal, ns))| {
            PromptExample::new(
                format!("golden-{i}"),
                ns.iter().map(|s| s.to_string()).collect(),
                with_goals.then(|| goal.to_string()),
            )
        })
        .collect()
}

fn history(texts: &[&str]) -> VisualHistory {
    VisualHistory::from_narrations(
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let span = Span::new(i as f64 * 2.0, (i + 1) as f64 * 2.0).expect("ordered");
                Narration::new(*t, span, NarrationSource::GroundTruth).expect("non-empty")
            })
            .collect(),
    )
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Every golden, rendered from the fixed inputs above.
pub fn golden_cases() -> Result<Vec<GoldenCase>, PromptError> {
    let case = |name: &str, text: String| GoldenCase {
        name: name.to_string(),
        text,
    };
    let h = history(&HISTORY);
    Ok(vec![
        case(
            "lta_8shot_z20",
            build_lta_prompt(&examples(false), &h, 20)?.text,
        ),
        case("lta_zero_shot_z20", build_lta_prompt(&[], &h, 20)?.text),
        case(
            "lta_single_history_z5",
            build_lta_prompt(&examples(false), &history(&HISTORY[..1]), 5)?.text,
        ),
        case(
            "vpa_latte_goal_z3",
            build_vpa_prompt("Make a latte", &examples(true), &h, 3, true)?.text,
        ),
        case(
            "vpa_latte_no_goal_z3",
            build_vpa_prompt("Make a latte", &examples(true), &h, 3, false)?.text,
        ),
        case(
            "vpa_caprese_goal_z4",
            build_vpa_prompt(CAPRESE_GOAL, &examples(true), &h, 4, true)?.text,
        ),
        case(
            "summarize_latte",
            render_summarization_prompt("make a latte", &strings(&SUMMARY_NARRATIONS)),
        ),
        case(
            "goal_latte",
            render_goal_prompt(&strings(&SUMMARY_NARRATIONS)),
        ),
    ])
}

/// The goldens directory of this source tree.
pub fn repo_goldens_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../goldens")
}

fn golden_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.{GOLDEN_EXTENSION}"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub matched: Vec<String>,
    /// Files whose bytes differ, with the first differing byte offset.
    pub mismatched: Vec<(String, usize)>,
    pub missing: Vec<String>,
}

impl GoldenCheck {
    pub fn is_ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for n in &self.matched {
            out.push_str(&format!("ok        {n}\n"));
        }
        for (n, at) in &self.mismatched {
            out.push_str(&format!("MISMATCH  {n} (first difference at byte {at})\n"));
        }
        for n in &self.missing {
            out.push_str(&format!("MISSING   {n}\n"));
        }
        out
    }
}

fn first_difference(a: &[u8], b: &[u8]) -> usize {
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .unwrap_or(a.len().min(b.len()))
}

/// Compares every rendered golden with its file in `dir`, byte for byte.
pub fn check_goldens(dir: &Path) -> Result<GoldenCheck, PromptError> {
    let mut check = GoldenCheck::default();
    for c in golden_cases()? {
        match std::fs::read(golden_path(dir, &c.name)) {
            Ok(bytes) if bytes == c.text.as_bytes() => check.matched.push(c.name),
            Ok(bytes) => {
                let at = first_difference(&bytes, c.text.as_bytes());
                check.mismatched.push((c.name, at));
            }
            Err(_) => check.missing.push(c.name),
        }
    }
    Ok(check)
}

/// Rewrites every golden file in `dir`.
pub fn update_goldens(dir: &Path) -> Result<Vec<PathBuf>, std::io::Error> {
    std::fs::create_dir_all(dir)?;
    let cases = golden_cases().map_err(std::io::Error::other)?;
    let mut written = Vec::new();
    for c in cases {
        let p = golden_path(dir, &c.name);
        std::fs::write(&p, &c.text)?;
        written.push(p);
    }
    Ok(written)
}
