//! Demonstration packing for completion-style models.
//!
//! A packed prompt is the task instruction, then as many demonstrations as
//! fit, then the test block, all separated by blank lines:
//!
//! ```text
//! Is the following post offensive? and why?
//!
//! Post: ...
//! Answer: Yes
//! Reason: ...
//!
//! Post: ...
//! Answer:
//! ```
//!
//! The model completes the final `Answer:` line and the `Reason:` line.

use serde::{Deserialize, Serialize};

use super::render::format_target;
use super::{surface_for, PromptFamily, PromptVariant};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::task::TaskId;
use crate::text::trim_end_punct;

/// Length budget for packed prompts, expressed in tokens and converted to
/// characters with a fixed ratio instead of a real tokenizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingProfile {
    pub token_budget: usize,
    pub chars_per_token: f64,
}

impl Default for PackingProfile {
    /// A 2049-token context minus room for a 100-token completion.
    fn default() -> Self {
        PackingProfile {
            token_budget: 1949,
            chars_per_token: 4.0,
        }
    }
}

impl PackingProfile {
    pub fn char_budget(&self) -> usize {
        (self.token_budget as f64 * self.chars_per_token).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedPrompt {
    pub text: String,
    pub demo_count: usize,
}

pub fn incontext_header(task: TaskId) -> &'static str {
    match task {
        TaskId::Sbic => "Is the following post offensive? and why?",
        TaskId::Esnli => "Answer the question and provide a reason why the answer is correct.",
        TaskId::Ecqa => {
            "Answer the question from the provided choices, and provide a reason why the answer is correct."
        }
        TaskId::Comve => "Which of the two choices makes more sense? and why?",
    }
}

/// The instance's block, ending with an open `Answer:` slot.
pub fn incontext_block(inst: &Instance) -> Result<String> {
    Ok(match inst.task {
        TaskId::Sbic => format!("Post: {}\nAnswer:", inst.field("post")?),
        TaskId::Esnli => format!(
            "{}\nQuestion: Is {}?\nAnswer:",
            inst.field("premise")?,
            trim_end_punct(inst.field("hypothesis")?)
        ),
        TaskId::Ecqa => {
            inst.field("question")?;
            for k in 1..=5 {
                inst.field(&format!("choice{k}"))?;
            }
            format!(
                "Question: {}\nChoices: {}\nAnswer:",
                inst.field("question")?,
                inst.choices().join(", ")
            )
        }
        TaskId::Comve => format!(
            "Choice1: {}\nChoice2: {}\nAnswer:",
            inst.field("sentence1")?,
            inst.field("sentence2")?
        ),
    })
}

/// A demonstration: the block with its gold answer and reason filled in.
pub fn incontext_demo(inst: &Instance) -> Result<String> {
    let variant = PromptVariant::new(inst.task, PromptFamily::Incontext);
    let answer = surface_for(&variant, inst, &inst.label)?;
    Ok(format!(
        "{} {}",
        incontext_block(inst)?,
        format_target(&variant, &answer, &inst.explanation)
    ))
}

const SEPARATOR: &str = "\n\n";

/// Greedily pack `demos` in order ahead of `test`, stopping before the first
/// demonstration that would push the prompt past `char_budget` characters.
pub fn render_incontext(
    demos: &[&Instance],
    test: &Instance,
    char_budget: usize,
) -> Result<PackedPrompt> {
    let header = incontext_header(test.task);
    let block = incontext_block(test)?;
    let sep = SEPARATOR.chars().count();
    let mut used = header.chars().count() + sep + block.chars().count();

    let mut text = String::from(header);
    text.push_str(SEPARATOR);
    let mut demo_count = 0;
    for demo in demos {
        let rendered = incontext_demo(demo)?;
        let cost = rendered.chars().count() + sep;
        if used + cost > char_budget {
            break;
        }
        used += cost;
        text.push_str(&rendered);
        text.push_str(SEPARATOR);
        demo_count += 1;
    }
    if demo_count == 0 {
        return Err(Error::PackingBudget {
            budget: char_budget,
            test_block: header.chars().count() + sep + block.chars().count(),
        });
    }
    text.push_str(&block);
    Ok(PackedPrompt { text, demo_count })
}
