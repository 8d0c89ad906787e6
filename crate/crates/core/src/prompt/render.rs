use serde::{Deserialize, Serialize};

use super::incontext::{incontext_block, incontext_header, render_incontext, PackingProfile};
use super::{
    answer_surfaces, surface_for, PromptFamily, PromptVariant, QuestionForm, END_OF_SEQUENCE,
    QA_SEPARATOR, SENTINELS,
};
use crate::error::{Error, Result};
use crate::instance::{Corpus, Instance};
use crate::split::Split;
use crate::task::TaskId;
use crate::text::{lower_first, trim_end_punct};

/// One (input, target) pair for a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedExample {
    #[serde(rename = "id")]
    pub instance_id: String,
    pub input: String,
    pub target: String,
}

fn task_prefix(task: TaskId) -> &'static str {
    match task {
        TaskId::Esnli => "explain nli",
        TaskId::Comve => "explain sensemaking",
        TaskId::Ecqa | TaskId::Sbic => "explain",
    }
}

/// `(field, tag)` pairs in display order for the T5-style families.
fn t5_layout(task: TaskId) -> &'static [(&'static str, &'static str)] {
    match task {
        // MNLI order: hypothesis first.
        TaskId::Esnli => &[("hypothesis", "hypothesis"), ("premise", "premise")],
        _ => qa_layout(task),
    }
}

/// `(field, tag)` pairs in display order for the question-answering families.
fn qa_layout(task: TaskId) -> &'static [(&'static str, &'static str)] {
    match task {
        TaskId::Esnli => &[("premise", "premise"), ("hypothesis", "hypothesis")],
        TaskId::Comve => &[("sentence1", "choice1"), ("sentence2", "choice2")],
        TaskId::Sbic => &[("post", "post")],
        TaskId::Ecqa => &[
            ("question", "question"),
            ("choice1", "choice1"),
            ("choice2", "choice2"),
            ("choice3", "choice3"),
            ("choice4", "choice4"),
            ("choice5", "choice5"),
        ],
    }
}

fn body(inst: &Instance, layout: &[(&str, &str)], with_tags: bool) -> Result<String> {
    let mut parts = Vec::with_capacity(layout.len());
    for (field, tag) in layout {
        let value = inst.field(field)?;
        parts.push(if with_tags {
            format!("{tag}: {value}")
        } else {
            value.to_string()
        });
    }
    Ok(parts.join(" "))
}

/// Question text for the QA families, sentence-cased.
fn question_text(task: TaskId, form: QuestionForm) -> &'static str {
    match (task, form) {
        (TaskId::Esnli, QuestionForm::Is) => "Does the premise entail the hypothesis?",
        (TaskId::Comve, QuestionForm::Is) => "Is choice2 more nonsensical?",
        (TaskId::Comve, _) => "What is more nonsensical?",
        (TaskId::Sbic, QuestionForm::Is) => "Is this post offensive?",
        _ => "What is this?",
    }
}

fn lettered(options: &[&str]) -> String {
    options
        .iter()
        .zip('A'..)
        .map(|(o, letter)| format!("({letter}) {o}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn check(inst: &Instance, variant: &PromptVariant) -> Result<()> {
    variant.validate()?;
    if inst.task != variant.task {
        return Err(Error::InvalidVariant(format!(
            "{variant} cannot render {} instance `{}`",
            inst.task, inst.id
        )));
    }
    Ok(())
}

pub fn render_input(inst: &Instance, variant: &PromptVariant) -> Result<String> {
    check(inst, variant)?;
    let task = variant.task;
    let prefix = task_prefix(task);
    let tags = variant.with_tags;
    let text = match variant.family {
        PromptFamily::InfillingBasic => format!(
            "{prefix} {} {} because {}",
            body(inst, t5_layout(task), tags)?,
            SENTINELS[0],
            SENTINELS[1]
        ),
        PromptFamily::InfillingNatural => {
            let phrase = match task {
                TaskId::Ecqa => format!("The answer is {} because {}", SENTINELS[0], SENTINELS[1]),
                TaskId::Comve => format!(
                    "It is {} that choice2 is less common because {}",
                    SENTINELS[0], SENTINELS[1]
                ),
                TaskId::Esnli | TaskId::Sbic => {
                    format!("This is {} because {}", SENTINELS[0], SENTINELS[1])
                }
            };
            format!("{prefix} {} {phrase}", body(inst, t5_layout(task), tags)?)
        }
        PromptFamily::ApproxT5 => {
            let b = body(inst, t5_layout(task), tags)?;
            match task {
                TaskId::Comve => format!("{prefix} {b} Less common is choice2"),
                _ => format!("{prefix} {b}"),
            }
        }
        PromptFamily::SquadT5 => {
            if task == TaskId::Ecqa {
                let choices = body(inst, &qa_layout(task)[1..], true)?;
                format!(
                    "{prefix} question: {} context: {choices}",
                    inst.field("question")?
                )
            } else {
                format!(
                    "{prefix} question: {} context: {}",
                    question_text(task, variant.question_form),
                    body(inst, qa_layout(task), tags)?
                )
            }
        }
        PromptFamily::QaSimple => {
            if task == TaskId::Ecqa {
                format!(
                    "explain {} {QA_SEPARATOR} {}{END_OF_SEQUENCE}",
                    inst.field("question")?,
                    lettered(&inst.choices())
                )
            } else {
                let question = lower_first(question_text(task, variant.question_form));
                let choices = if variant.with_choices {
                    let options: Vec<&str> = answer_surfaces(variant)
                        .unwrap_or_default()
                        .into_iter()
                        .map(|(s, _)| s)
                        .collect();
                    format!("{} {QA_SEPARATOR} ", lettered(&options))
                } else {
                    String::new()
                };
                format!(
                    "explain {question} {QA_SEPARATOR} {choices}{}{END_OF_SEQUENCE}",
                    body(inst, qa_layout(task), tags)?
                )
            }
        }
        PromptFamily::Unifew => {
            let options: Vec<&str> = answer_surfaces(variant)
                .unwrap_or_default()
                .into_iter()
                .map(|(s, _)| s)
                .collect();
            let options = lettered(&options);
            let tag = |t: &str| {
                if tags {
                    format!("{t}: ")
                } else {
                    String::new()
                }
            };
            match task {
                TaskId::Esnli => format!(
                    "explain {}{} Is {}{}? {QA_SEPARATOR} {options}",
                    tag("premise"),
                    inst.field("premise")?,
                    tag("hypothesis"),
                    trim_end_punct(inst.field("hypothesis")?)
                ),
                _ => format!(
                    "explain Offensiveness? {QA_SEPARATOR} {options} {QA_SEPARATOR} {}",
                    body(inst, qa_layout(task), tags)?
                ),
            }
        }
        PromptFamily::Incontext => {
            format!("{}\n\n{}", incontext_header(task), incontext_block(inst)?)
        }
    };
    Ok(text)
}

/// Assemble a target string from an answer surface and an explanation.
///
/// An empty explanation yields the bare answer in the family's grammar; the
/// built-in oracles use this to emit label-only outputs.
pub fn format_target(variant: &PromptVariant, answer: &str, explanation: &str) -> String {
    let explanation = explanation.trim();
    match variant.family {
        PromptFamily::InfillingBasic | PromptFamily::InfillingNatural => {
            if explanation.is_empty() {
                format!(
                    "{} {answer} {} {}",
                    SENTINELS[0], SENTINELS[1], SENTINELS[2]
                )
            } else {
                format!(
                    "{} {answer} {} {explanation} {}",
                    SENTINELS[0], SENTINELS[1], SENTINELS[2]
                )
            }
        }
        PromptFamily::Incontext => {
            if explanation.is_empty() {
                answer.to_string()
            } else {
                format!("{answer}\nReason: {explanation}")
            }
        }
        _ => {
            if explanation.is_empty() {
                answer.to_string()
            } else {
                format!("{answer} because {}", lower_first(explanation))
            }
        }
    }
}

pub fn render_target(inst: &Instance, variant: &PromptVariant) -> Result<String> {
    check(inst, variant)?;
    if inst.explanation.trim().is_empty() {
        return Err(Error::InvalidInstance {
            id: inst.id.clone(),
            reason: "empty explanation".into(),
        });
    }
    let answer = surface_for(variant, inst, &inst.label)?;
    Ok(format_target(variant, &answer, &inst.explanation))
}

/// Rendered train and dev sides of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSplit {
    pub split_index: usize,
    pub train: Vec<RenderedExample>,
    pub dev: Vec<RenderedExample>,
    /// Demonstrations packed into each dev prompt (in-context family only).
    pub demo_counts: Vec<usize>,
}

pub fn render_split(
    split: &Split,
    corpus: &Corpus,
    variant: &PromptVariant,
    packing: &PackingProfile,
) -> Result<RenderedSplit> {
    let train_insts: Vec<&Instance> = split
        .train_ids
        .iter()
        .map(|id| corpus.get(id))
        .collect::<Result<_>>()?;

    let mut train = Vec::with_capacity(train_insts.len());
    for inst in &train_insts {
        let input = if variant.family == PromptFamily::Incontext {
            check(inst, variant)?;
            incontext_block(inst)?
        } else {
            render_input(inst, variant)?
        };
        train.push(RenderedExample {
            instance_id: inst.id.clone(),
            input,
            target: render_target(inst, variant)?,
        });
    }

    let mut dev = Vec::with_capacity(split.dev_ids.len());
    let mut demo_counts = Vec::new();
    for id in &split.dev_ids {
        let inst = corpus.get(id)?;
        let input = if variant.family == PromptFamily::Incontext {
            check(inst, variant)?;
            let packed = render_incontext(&train_insts, inst, packing.char_budget())?;
            demo_counts.push(packed.demo_count);
            packed.text
        } else {
            render_input(inst, variant)?
        };
        dev.push(RenderedExample {
            instance_id: inst.id.clone(),
            input,
            target: render_target(inst, variant)?,
        });
    }
    Ok(RenderedSplit {
        split_index: split.split_index,
        train,
        dev,
        demo_counts,
    })
}
