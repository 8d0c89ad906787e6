//! Fixtures shared by the integration and acceptance test targets.

use explainbench_core::instance::Instance;
use explainbench_core::prompt::{PromptFamily, PromptVariant, QuestionForm};
use explainbench_core::task::TaskId;
use indexmap::IndexMap;

pub fn stove() -> Instance {
    Instance {
        id: "stove".into(),
        task: TaskId::Comve,
        fields: IndexMap::from([
            (
                "sentence1".to_string(),
                "The stove was cleaned with a cleaner.".to_string(),
            ),
            (
                "sentence2".to_string(),
                "The stove was cleaned with a mop.".to_string(),
            ),
        ]),
        label: "choice2".into(),
        explanation: "A mop is too large to clean the stove.".into(),
        source_row: Some(0),
    }
}

pub const X: &str = "The stove was cleaned with a cleaner.";
pub const Y: &str = "The stove was cleaned with a mop.";

/// Golden ComVE renderings for every variant: (variant, input, target).
pub fn comve_table() -> Vec<(PromptVariant, String, String)> {
    use PromptFamily::*;
    use QuestionForm::*;
    let v = |f| PromptVariant::new(TaskId::Comve, f);
    let because = |a: &str| format!("{a} because a mop is too large to clean the stove.");
    vec![
        (
            v(InfillingBasic).tags(true),
            format!("explain sensemaking choice1: {X} choice2: {Y} <extra_id_0> because <extra_id_1>"),
            "<extra_id_0> choice2 <extra_id_1> A mop is too large to clean the stove. <extra_id_2>".into(),
        ),
        (
            v(InfillingNatural).tags(true),
            format!(
                "explain sensemaking choice1: {X} choice2: {Y} It is <extra_id_0> that choice2 is less common because <extra_id_1>"
            ),
            "<extra_id_0> True <extra_id_1> A mop is too large to clean the stove. <extra_id_2>".into(),
        ),
        (
            v(ApproxT5).tags(true),
            format!("explain sensemaking choice1: {X} choice2: {Y} Less common is choice2"),
            because("True"),
        ),
        (
            v(SquadT5).question(Is).tags(true),
            format!("explain sensemaking question: Is choice2 more nonsensical? context: choice1: {X} choice2: {Y}"),
            because("Yes"),
        ),
        (
            v(SquadT5).question(WhatIs).tags(true),
            format!("explain sensemaking question: What is more nonsensical? context: choice1: {X} choice2: {Y}"),
            because("choice2"),
        ),
        (
            v(QaSimple).question(Is),
            format!("explain is choice2 more nonsensical? \\n {X} {Y}</s>"),
            because("yes"),
        ),
        (
            v(QaSimple).question(Is).tags(true),
            format!("explain is choice2 more nonsensical? \\n choice1: {X} choice2: {Y}</s>"),
            because("yes"),
        ),
        (
            v(QaSimple).question(Is).tags(true).choices(true),
            format!("explain is choice2 more nonsensical? \\n (A) yes (B) no \\n choice1: {X} choice2: {Y}</s>"),
            because("yes"),
        ),
        (
            v(QaSimple).question(WhatIs),
            format!("explain what is more nonsensical? \\n {X} {Y}</s>"),
            because("choice2"),
        ),
        (
            v(QaSimple).question(WhatIs).tags(true),
            format!("explain what is more nonsensical? \\n choice1: {X} choice2: {Y}</s>"),
            because("choice2"),
        ),
        (
            v(QaSimple).question(WhatIs).tags(true).choices(true),
            format!(
                "explain what is more nonsensical? \\n (A) choice1 (B) choice2 \\n choice1: {X} choice2: {Y}</s>"
            ),
            because("choice2"),
        ),
    ]
}
