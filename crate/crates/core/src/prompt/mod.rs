//! Prompt families and the label surface forms each one uses.
//!
//! Every family except in-context packing produces an input string and a
//! target string for a text-to-text model. Targets take one of three shapes:
//!
//! * `{answer} because {explanation}` (first letter of the explanation lowercased),
//! * `<extra_id_0> {answer} <extra_id_1> {explanation} <extra_id_2>` for infilling,
//! * `{answer}\nReason: {explanation}` completing an in-context block that ends in `Answer:`.
//!
//! The `\n` separator in the question-answering families is the literal
//! two-character sequence backslash + `n`.

mod incontext;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::task::TaskId;

pub use incontext::{
    incontext_block, incontext_demo, incontext_header, render_incontext, PackedPrompt,
    PackingProfile,
};
pub use render::{
    format_target, render_input, render_split, render_target, RenderedExample, RenderedSplit,
};

/// The three infilling sentinels, in the order they appear.
pub const SENTINELS: [&str; 3] = ["<extra_id_0>", "<extra_id_1>", "<extra_id_2>"];

/// Visible separator token of the question-answering formats.
pub const QA_SEPARATOR: &str = "\\n";

pub const END_OF_SEQUENCE: &str = "</s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFamily {
    InfillingBasic,
    InfillingNatural,
    ApproxT5,
    SquadT5,
    QaSimple,
    Unifew,
    Incontext,
}

impl PromptFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptFamily::InfillingBasic => "infilling_basic",
            PromptFamily::InfillingNatural => "infilling_natural",
            PromptFamily::ApproxT5 => "approx_t5",
            PromptFamily::SquadT5 => "squad_t5",
            PromptFamily::QaSimple => "qa_simple",
            PromptFamily::Unifew => "unifew",
            PromptFamily::Incontext => "incontext",
        }
    }

    pub fn is_infilling(self) -> bool {
        matches!(
            self,
            PromptFamily::InfillingBasic | PromptFamily::InfillingNatural
        )
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidVariant(format!("unknown prompt family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionForm {
    #[default]
    None,
    /// Yes/no ("Is ...?") question; E-SNLI also admits "maybe".
    Is,
    /// "What is ...?" question answered with the label verbatim.
    WhatIs,
}

impl QuestionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionForm::None => "none",
            QuestionForm::Is => "is",
            QuestionForm::WhatIs => "what_is",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidVariant(format!("unknown question form `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptVariant {
    pub task: TaskId,
    pub family: PromptFamily,
    #[serde(default)]
    pub question_form: QuestionForm,
    #[serde(default)]
    pub with_tags: bool,
    #[serde(default)]
    pub with_choices: bool,
}

impl PromptVariant {
    pub fn new(task: TaskId, family: PromptFamily) -> Self {
        PromptVariant {
            task,
            family,
            question_form: QuestionForm::None,
            with_tags: false,
            with_choices: false,
        }
    }

    pub fn question(mut self, form: QuestionForm) -> Self {
        self.question_form = form;
        self
    }

    pub fn tags(mut self, on: bool) -> Self {
        self.with_tags = on;
        self
    }

    pub fn choices(mut self, on: bool) -> Self {
        self.with_choices = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        use PromptFamily::*;
        let bad = |why: &str| Err(Error::InvalidVariant(format!("{self}: {why}")));
        let qa_family = matches!(self.family, SquadT5 | QaSimple);
        let is_ecqa = self.task == TaskId::Ecqa;

        if !qa_family && self.question_form != QuestionForm::None {
            return bad("question form only applies to squad_t5 and qa_simple");
        }
        if qa_family && !is_ecqa && self.question_form == QuestionForm::None {
            return bad("classification tasks need an is or what_is question");
        }
        if qa_family && is_ecqa && self.question_form != QuestionForm::None {
            return bad("ecqa asks its own question");
        }
        if self.with_choices && !matches!(self.family, QaSimple | Unifew) {
            return bad("label choices only apply to qa_simple and unifew");
        }
        match self.family {
            Unifew => {
                if !matches!(self.task, TaskId::Esnli | TaskId::Sbic) {
                    return bad("unifew formats exist only for esnli and sbic");
                }
                if !self.with_choices {
                    return bad("unifew always lists the label choices");
                }
            }
            Incontext => {
                if self.with_tags || self.with_choices {
                    return bad("in-context templates are fixed");
                }
            }
            SquadT5 if is_ecqa && !self.with_tags => {
                return bad("ecqa squad_t5 always tags its choices");
            }
            QaSimple if is_ecqa && (self.with_tags || !self.with_choices) => {
                return bad("ecqa qa_simple uses the multiple-choice format (choices, no tags)");
            }
            _ => {}
        }
        Ok(())
    }

    /// Stable identifier used in artifact file names.
    pub fn slug(&self) -> String {
        let mut s = self.family.as_str().to_string();
        if self.question_form != QuestionForm::None {
            s.push('-');
            s.push_str(self.question_form.as_str());
        }
        if self.with_tags {
            s.push_str("-tags");
        }
        if self.with_choices {
            s.push_str("-choices");
        }
        s
    }

    /// Every variant the renderer supports for `task`.
    pub fn applicable(task: TaskId) -> Vec<PromptVariant> {
        use PromptFamily::*;
        use QuestionForm::*;
        let v = |f| PromptVariant::new(task, f);
        let mut out = vec![
            v(InfillingBasic).tags(true),
            v(InfillingNatural).tags(true),
            v(ApproxT5).tags(true),
        ];
        if task == TaskId::Ecqa {
            out.push(v(SquadT5).tags(true));
            out.push(v(QaSimple).choices(true));
        } else {
            for q in [Is, WhatIs] {
                out.push(v(SquadT5).question(q));
                out.push(v(SquadT5).question(q).tags(true));
                out.push(v(QaSimple).question(q));
                out.push(v(QaSimple).question(q).tags(true));
                out.push(v(QaSimple).question(q).tags(true).choices(true));
            }
            if matches!(task, TaskId::Esnli | TaskId::Sbic) {
                out.push(v(Unifew).choices(true));
                out.push(v(Unifew).choices(true).tags(true));
            }
        }
        out.push(v(Incontext));
        out
    }

    /// The per-task prompt used for the scaled-up models: approx_t5 for
    /// E-SNLI, qa_simple (what is + tags) elsewhere.
    pub fn recommended(task: TaskId) -> PromptVariant {
        match task {
            TaskId::Esnli => PromptVariant::new(task, PromptFamily::ApproxT5).tags(true),
            TaskId::Ecqa => PromptVariant::new(task, PromptFamily::QaSimple).choices(true),
            _ => PromptVariant::new(task, PromptFamily::QaSimple)
                .question(QuestionForm::WhatIs)
                .tags(true),
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.task, self.slug())
    }
}

/// `(surface, canonical label)` pairs a variant uses for a classification
/// task, in display order. `None` for ECQA, whose answers are its choices.
pub fn answer_surfaces(variant: &PromptVariant) -> Option<Vec<(&'static str, &'static str)>> {
    use PromptFamily::*;
    use QuestionForm::Is;
    let f = variant.family;
    let q = variant.question_form;
    let surfaces: Vec<(&str, &str)> = match variant.task {
        TaskId::Ecqa => return None,
        TaskId::Esnli => match (f, q) {
            (SquadT5, Is) | (Unifew, _) | (Incontext, _) => vec![
                ("Yes", "entailment"),
                ("No", "contradiction"),
                ("Maybe", "neutral"),
            ],
            (QaSimple, Is) => vec![
                ("yes", "entailment"),
                ("no", "contradiction"),
                ("maybe", "neutral"),
            ],
            _ => canonical(&["entailment", "neutral", "contradiction"]),
        },
        TaskId::Comve => match (f, q) {
            (InfillingNatural, _) | (ApproxT5, _) => {
                vec![("True", "choice2"), ("False", "choice1")]
            }
            (SquadT5, Is) => vec![("Yes", "choice2"), ("No", "choice1")],
            (QaSimple, Is) => vec![("yes", "choice2"), ("no", "choice1")],
            // The completion template asks which choice makes more sense,
            // i.e. the complement of the nonsensical one.
            (Incontext, _) => vec![("Choice1", "choice2"), ("Choice2", "choice1")],
            _ => canonical(&["choice1", "choice2"]),
        },
        TaskId::Sbic => match (f, q) {
            (SquadT5, Is) | (Incontext, _) => {
                vec![("Yes", "offensive"), ("No", "not offensive")]
            }
            (QaSimple, Is) => vec![("yes", "offensive"), ("no", "not offensive")],
            _ => canonical(&["offensive", "not offensive"]),
        },
    };
    Some(surfaces)
}

fn canonical(labels: &[&'static str]) -> Vec<(&'static str, &'static str)> {
    labels.iter().map(|l| (*l, *l)).collect()
}

/// The answer text a variant uses for `label` on `instance`.
pub fn surface_for(variant: &PromptVariant, instance: &Instance, label: &str) -> Result<String> {
    match answer_surfaces(variant) {
        None => instance
            .choices()
            .into_iter()
            .find(|c| *c == label)
            .map(str::to_string)
            .ok_or_else(|| Error::InvalidInstance {
                id: instance.id.clone(),
                reason: format!("answer `{label}` is not one of the choices"),
            }),
        Some(surfaces) => surfaces
            .iter()
            .find(|(_, canon)| *canon == label)
            .map(|(s, _)| s.to_string())
            .ok_or_else(|| Error::InvalidInstance {
                id: instance.id.clone(),
                reason: format!("label `{label}` has no surface form in {variant}"),
            }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applicable_variants_validate() {
        for task in TaskId::ALL {
            let vs = PromptVariant::applicable(task);
            for v in &vs {
                v.validate().unwrap_or_else(|e| panic!("{v}: {e}"));
            }
            let mut slugs: Vec<_> = vs.iter().map(|v| v.slug()).collect();
            slugs.sort();
            slugs.dedup();
            assert_eq!(slugs.len(), vs.len(), "{task}: duplicate slugs");
            PromptVariant::recommended(task).validate().unwrap();
        }
    }

    #[test]
    fn rejects_inconsistent_variants() {
        let t = TaskId::Comve;
        let bad = [
            PromptVariant::new(t, PromptFamily::ApproxT5).question(QuestionForm::Is),
            PromptVariant::new(t, PromptFamily::ApproxT5).choices(true),
            PromptVariant::new(t, PromptFamily::QaSimple),
            PromptVariant::new(t, PromptFamily::Unifew).choices(true),
            PromptVariant::new(t, PromptFamily::Incontext).tags(true),
            PromptVariant::new(TaskId::Ecqa, PromptFamily::QaSimple).question(QuestionForm::Is),
            PromptVariant::new(TaskId::Sbic, PromptFamily::Unifew),
        ];
        for v in bad {
            assert!(v.validate().is_err(), "{v} should be invalid");
        }
    }

    #[test]
    fn surfaces_are_bijective() {
        for task in TaskId::ALL {
            for v in PromptVariant::applicable(task) {
                let Some(s) = answer_surfaces(&v) else {
                    continue;
                };
                let mut surf: Vec<_> = s.iter().map(|(a, _)| a.to_lowercase()).collect();
                let mut canon: Vec<_> = s.iter().map(|(_, b)| *b).collect();
                surf.sort();
                surf.dedup();
                canon.sort();
                canon.dedup();
                assert_eq!(surf.len(), s.len(), "{v}");
                assert_eq!(canon.len(), s.len(), "{v}");
            }
        }
    }

    #[test]
    fn family_names_parse() {
        assert_eq!(
            PromptFamily::parse("qa_simple").unwrap(),
            PromptFamily::QaSimple
        );
        assert_eq!(
            QuestionForm::parse("what_is").unwrap(),
            QuestionForm::WhatIs
        );
        assert!(PromptFamily::parse("soft_prompt").is_err());
    }
}
