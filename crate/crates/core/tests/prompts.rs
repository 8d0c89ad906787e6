mod common;

use common::{comve_table, stove};
use explainbench_core::instance::Instance;
use explainbench_core::prompt::{
    render_incontext, render_input, render_target, PromptFamily, PromptVariant, QuestionForm,
};
use explainbench_core::task::TaskId;

#[test]
fn comve_golden_prompts_are_byte_exact() {
    let inst = stove();
    let table = comve_table();
    assert_eq!(table.len(), 11);
    for (variant, input, target) in table {
        assert_eq!(
            render_input(&inst, &variant).unwrap(),
            input,
            "{variant} input"
        );
        assert_eq!(
            render_target(&inst, &variant).unwrap(),
            target,
            "{variant} target"
        );
    }
}

#[test]
fn separator_is_backslash_n_not_newline() {
    let v = PromptVariant::new(TaskId::Comve, PromptFamily::QaSimple).question(QuestionForm::Is);
    let input = render_input(&stove(), &v).unwrap();
    assert!(input.contains("\\n"));
    assert!(!input.contains('\n'));
}

#[test]
fn incontext_prompt_layout() {
    let demo = stove();
    let mut test = stove();
    test.id = "t".into();
    test.fields["sentence1"] = "He put an elephant into the fridge.".into();
    test.fields["sentence2"] = "He put a turkey into the fridge.".into();
    let packed = render_incontext(&[&demo], &test, 10_000).unwrap();
    assert_eq!(packed.demo_count, 1);
    assert_eq!(
        packed.text,
        "Which of the two choices makes more sense? and why?\n\n\
         Choice1: The stove was cleaned with a cleaner.\n\
         Choice2: The stove was cleaned with a mop.\n\
         Answer: Choice1\n\
         Reason: A mop is too large to clean the stove.\n\n\
         Choice1: He put an elephant into the fridge.\n\
         Choice2: He put a turkey into the fridge.\n\
         Answer:"
    );
}

#[test]
fn packing_is_monotone_and_respects_budget() {
    let demos: Vec<Instance> = (0..48)
        .map(|i| {
            let mut d = stove();
            d.id = format!("d{i}");
            d.explanation = format!("Reason number {i} {}", "word ".repeat(i % 7))
                .trim()
                .to_string();
            d
        })
        .collect();
    let refs: Vec<&Instance> = demos.iter().collect();
    let test = stove();
    let mut last = 0;
    let mut any_fit = false;
    for budget in (0..12_000).step_by(37) {
        match render_incontext(&refs, &test, budget) {
            Ok(p) => {
                any_fit = true;
                assert!(p.text.chars().count() <= budget);
                assert!(p.demo_count >= last, "budget {budget}");
                last = p.demo_count;
            }
            Err(e) => {
                assert!(
                    !any_fit,
                    "budget {budget} failed after smaller budgets fit: {e}"
                );
            }
        }
    }
    assert_eq!(last, 48);
}
