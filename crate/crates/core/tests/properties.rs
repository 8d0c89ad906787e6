use std::collections::BTreeSet;

use explainbench_core::humaneval::fleiss_kappa;
use explainbench_core::instance::Instance;
use explainbench_core::metrics::{
    aggregate_benchmark, aggregate_split, lexical_f1, score_split, InstanceScore, LexicalF1Scorer,
    SplitScore,
};
use explainbench_core::parse::{parse_output, LabelVocabulary, Prediction};
use explainbench_core::prompt::{format_target, render_target, surface_for, PromptVariant};
use explainbench_core::split::{check_split, sample_splits, split_digest};
use explainbench_core::task::{TaskId, TaskSpec};
use explainbench_core::text::collapse_whitespace;
use explainbench_core::{synthetic, Corpus};
use indexmap::IndexMap;
use proptest::prelude::*;
use proptest::sample::select;

fn task() -> impl Strategy<Value = TaskId> {
    select(TaskId::ALL.to_vec())
}

/// Explanation text as the loader leaves it: collapsed whitespace, no
/// lowercase first letter, no markup.
fn explanation() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ,.;:!?'\"()é-]{1,60}( because [a-z ,.]{0,20})?".prop_filter_map("empty", |s| {
        let s = collapse_whitespace(&s);
        let s = explainbench_core::text::upper_first(&s);
        (!s.is_empty()).then_some(s)
    })
}

fn sentence() -> impl Strategy<Value = String> {
    "[A-Za-z][a-z ,.'-]{0,40}".prop_map(|s| collapse_whitespace(&s))
}

fn choice_word() -> impl Strategy<Value = String> {
    "[a-z]{2,9}( [a-z]{2,9})?"
}

fn instance_for(task: TaskId) -> BoxedStrategy<Instance> {
    let spec = TaskSpec::for_task(task);
    match task {
        TaskId::Ecqa => (
            sentence(),
            proptest::collection::btree_set(choice_word(), 5),
            0usize..5,
            explanation(),
        )
            .prop_map(|(q, choices, k, expl)| {
                let choices: Vec<String> = choices.into_iter().collect();
                let mut fields = IndexMap::from([("question".to_string(), format!("{q}?"))]);
                for (i, c) in choices.iter().enumerate() {
                    fields.insert(format!("choice{}", i + 1), c.clone());
                }
                Instance {
                    id: "p".into(),
                    task: TaskId::Ecqa,
                    fields,
                    label: choices[k].clone(),
                    explanation: expl,
                    source_row: None,
                }
            })
            .boxed(),
        _ => {
            let names = task.field_names();
            (
                proptest::collection::vec(sentence(), names.len()),
                select(spec.label_set.clone()),
                explanation(),
            )
                .prop_map(move |(values, label, expl)| Instance {
                    id: "p".into(),
                    task,
                    fields: names
                        .iter()
                        .map(|n| n.to_string())
                        .zip(
                            values
                                .into_iter()
                                .map(|v| if v.is_empty() { "x".into() } else { v }),
                        )
                        .collect(),
                    label,
                    explanation: expl,
                    source_row: None,
                })
                .boxed()
        }
    }
}

fn instance_and_variant() -> impl Strategy<Value = (Instance, PromptVariant)> {
    task().prop_flat_map(|t| (instance_for(t), select(PromptVariant::applicable(t))))
}

fn vocab(inst: &Instance, v: &PromptVariant) -> LabelVocabulary {
    LabelVocabulary::for_instance(&TaskSpec::for_task(inst.task), v, inst)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn round_trip((inst, v) in instance_and_variant()) {
        prop_assert!(inst.validate(&TaskSpec::for_task(inst.task)).is_ok());
        let target = render_target(&inst, &v).unwrap();
        let p = parse_output(&inst.id, &target, &v, &vocab(&inst, &v));
        prop_assert_eq!(p.label.as_deref(), Some(inst.label.as_str()), "{}", target);
        prop_assert_eq!(&p.explanation, &inst.explanation, "{}", target);
        prop_assert!(p.flags.is_empty(), "{:?}", p.flags);
    }

    #[test]
    fn parse_is_total((inst, v) in instance_and_variant(), text in ".{0,200}") {
        let _ = parse_output(&inst.id, &text, &v, &vocab(&inst, &v));
    }

    #[test]
    fn reparse_is_idempotent((inst, v) in instance_and_variant(), text in ".{0,120}") {
        let voc = vocab(&inst, &v);
        let first = parse_output(&inst.id, &text, &v, &voc);
        if let Some(label) = &first.label {
            let explanation = collapse_whitespace(&first.explanation);
            let rerendered = format_target(&v, &surface_for(&v, &inst, label).unwrap(), &explanation);
            let second = parse_output(&inst.id, &rerendered, &v, &voc);
            let third = parse_output(
                &inst.id,
                &format_target(&v, &surface_for(&v, &inst, label).unwrap(), &second.explanation),
                &v,
                &voc,
            );
            prop_assert_eq!(second.label.as_ref(), Some(label));
            prop_assert_eq!(&second.label, &third.label);
            prop_assert_eq!(&second.explanation, &third.explanation);
            prop_assert_eq!(&second.flags, &third.flags);
        }
    }

    #[test]
    fn ecqa_choices_canonicalize_to_themselves(inst in instance_for(TaskId::Ecqa), k in 0usize..5) {
        let v = PromptVariant::recommended(TaskId::Ecqa);
        let choice = inst.choices()[k].to_string();
        let p = parse_output("x", &format!(" {}. because y", choice.to_uppercase()), &v, &vocab(&inst, &v));
        prop_assert_eq!(p.label, Some(choice));
    }

    #[test]
    fn wrong_labels_score_zero(
        rows in proptest::collection::vec((any::<bool>(), 0usize..2, explanation(), explanation()), 1..40)
    ) {
        let labels = ["offensive", "not offensive"];
        let golds: Vec<Instance> = rows
            .iter()
            .enumerate()
            .map(|(i, (_, l, _, g))| Instance {
                id: format!("i{i}"),
                task: TaskId::Sbic,
                fields: IndexMap::from([("post".to_string(), "p".to_string())]),
                label: labels[*l].into(),
                explanation: g.clone(),
                source_row: None,
            })
            .collect();
        let preds: Vec<Prediction> = rows
            .iter()
            .enumerate()
            .map(|(i, (right, l, cand, g))| Prediction {
                instance_id: format!("i{i}"),
                raw_text: String::new(),
                label: Some(labels[if *right { *l } else { 1 - *l }].into()),
                // Wrong predictions sometimes carry the gold explanation verbatim.
                explanation: if *right { cand.clone() } else { g.clone() },
                flags: BTreeSet::new(),
            })
            .collect();
        let gold_refs: Vec<&Instance> = golds.iter().collect();
        let scores = score_split(&preds, &gold_refs, &LexicalF1Scorer).unwrap();
        for s in &scores {
            if !s.correct {
                prop_assert_eq!(s.similarity, 0.0);
            }
            prop_assert!((0.0..=1.0).contains(&s.similarity));
        }
        let agg = aggregate_split(0, &scores, scores.len()).unwrap();
        prop_assert!(agg.similarity_mean <= agg.accuracy_mean);
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        raw in proptest::collection::vec((any::<bool>(), 0.0f64..=1.0, 0usize..3), 2..60),
        seed in any::<u64>(),
    ) {
        let labels = ["entailment", "neutral", "contradiction"];
        let scores: Vec<InstanceScore> = raw
            .iter()
            .enumerate()
            .map(|(i, (c, s, l))| InstanceScore {
                instance_id: format!("i{i}"),
                gold_label: labels[*l].into(),
                correct: *c,
                similarity: if *c { *s } else { 0.0 },
            })
            .collect();
        let mut shuffled = scores.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = aggregate_split(0, &scores, scores.len()).unwrap();
        let b = aggregate_split(0, &shuffled, shuffled.len()).unwrap();
        prop_assert_eq!(&a, &b);

        let splits: Vec<SplitScore> = scores
            .chunks(1)
            .enumerate()
            .map(|(i, c)| aggregate_split(i, c, 1).unwrap())
            .collect();
        let mut rev = splits.clone();
        rev.reverse();
        let ra = aggregate_benchmark(TaskId::Esnli, "v", "s", &splits).unwrap();
        let rb = aggregate_benchmark(TaskId::Esnli, "v", "s", &rev).unwrap();
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn lexical_f1_is_bounded_and_symmetric(a in ".{0,60}", b in ".{0,60}") {
        let x = lexical_f1(&a, &b);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x, lexical_f1(&b, &a));
        prop_assert_eq!(lexical_f1(&a, &a), 1.0);
    }

    #[test]
    fn kappa_is_bounded(rows in proptest::collection::vec(0usize..20, 1..30)) {
        // Enumerate the 20 ways of spreading 3 ratings over 4 categories.
        let mut shapes = Vec::new();
        for a in 0..=3 {
            for b in 0..=3 - a {
                for c in 0..=3 - a - b {
                    shapes.push([a, b, c, 3 - a - b - c]);
                }
            }
        }
        let counts: Vec<[usize; 4]> = rows.iter().map(|&i| shapes[i]).collect();
        let k = fleiss_kappa(&counts, 3).unwrap();
        prop_assert!((-1.0..=1.0).contains(&k), "{}", k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splits_hold_their_invariants(t in task(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let loaded = synthetic::corpus(t, 700, 11, dir.path()).unwrap();
        let spec = TaskSpec::for_task(t);
        let splits = sample_splits(&loaded.instances, &spec, 3, 350, seed).unwrap();
        let again = sample_splits(&loaded.instances, &spec, 3, 350, seed).unwrap();
        let corpus = Corpus::new(loaded.instances).unwrap();
        for (s, s2) in splits.iter().zip(&again) {
            check_split(s, &corpus, &spec, 350).unwrap();
            prop_assert_eq!(split_digest(s), split_digest(s2));
        }
    }
}
