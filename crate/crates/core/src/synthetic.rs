//! Deterministic synthetic corpora written in each source dataset's format.
//!
//! Sentence lengths follow the typical word counts of the real datasets so
//! that prompt lengths, and therefore demonstration packing, behave alike.
//! Used by tests and benchmarks; the rows go through the real loaders.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{load_task, LoadedTask};
use crate::error::{Error, Result};
use crate::task::TaskId;

const NOUNS: &[&str] = &[
    "man", "woman", "child", "dog", "cat", "car", "street", "table", "kitchen", "park", "river",
    "ball", "house", "garden", "window", "teacher", "student", "doctor", "horse", "bicycle",
    "phone", "book", "chair", "market", "crowd", "beach", "mountain", "store", "road", "field",
    "stove", "mop", "bread", "coffee", "letter", "guitar", "camera", "bridge", "train", "boat",
];
const VERBS: &[&str] = &[
    "holds", "watches", "carries", "cleans", "paints", "finds", "opens", "pushes", "throws",
    "reads", "builds", "fixes", "follows", "visits", "climbs", "buys", "drops", "sells", "moves",
];
const ADJECTIVES: &[&str] = &[
    "young", "old", "small", "large", "red", "blue", "quiet", "busy", "wooden", "bright", "dark",
    "happy", "tired", "wet", "green", "heavy", "empty", "crowded", "famous", "local",
];
const PLACES: &[&str] = &[
    "in the park",
    "near the river",
    "on the street",
    "at the market",
    "in the kitchen",
    "by the window",
    "on the beach",
    "at the station",
    "in the garden",
    "under the bridge",
];
const GROUPS: &[&str] = &[
    "women",
    "immigrants",
    "old people",
    "poor folks",
    "muslims",
    "jewish folks",
    "black folks",
    "gay men",
    "disabled people",
    "asian folks",
];

struct Words {
    rng: ChaCha8Rng,
}

impl Words {
    fn pick(&mut self, list: &[&'static str]) -> &'static str {
        list.choose(&mut self.rng).expect("non-empty list")
    }

    /// A sentence of roughly `lo..=hi` words, without final punctuation.
    fn clause(&mut self, lo: usize, hi: usize) -> String {
        let target = self.rng.random_range(lo..=hi);
        let mut words: Vec<String> = vec![
            "the".into(),
            self.pick(ADJECTIVES).into(),
            self.pick(NOUNS).into(),
            self.pick(VERBS).into(),
            "a".into(),
            self.pick(NOUNS).into(),
        ];
        while words.len() < target {
            match self.rng.random_range(0..3) {
                0 => words.extend(self.pick(PLACES).split(' ').map(String::from)),
                1 => {
                    words.push("and".into());
                    words.push(self.pick(VERBS).into());
                    words.push("the".into());
                    words.push(self.pick(NOUNS).into());
                }
                _ => {
                    words.push("with".into());
                    words.push("a".into());
                    words.push(self.pick(ADJECTIVES).into());
                    words.push(self.pick(NOUNS).into());
                }
            }
        }
        words.truncate(target.max(3));
        words.join(" ")
    }

    fn sentence(&mut self, lo: usize, hi: usize) -> String {
        let c = self.clause(lo, hi);
        let mut s = c[..1].to_uppercase();
        s.push_str(&c[1..]);
        s.push('.');
        s
    }
}

fn csv_row(out: &mut String, cells: &[String]) {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(cells).expect("in-memory write");
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
}

/// Source file contents for `n` instances (SBIC: `n` posts, three rows each).
pub fn source_text(task: TaskId, n: usize, seed: u64) -> String {
    let mut g = Words {
        rng: ChaCha8Rng::seed_from_u64(seed ^ ((task as u64) << 32)),
    };
    let mut out = String::new();
    match task {
        TaskId::Esnli => {
            out.push_str("pairID,gold_label,Sentence1,Sentence2,Explanation_1\n");
            let labels = ["entailment", "neutral", "contradiction"];
            for i in 0..n {
                let label = labels[g.rng.random_range(0..3)];
                let premise = g.sentence(10, 18);
                let hyp = g.sentence(5, 10);
                let expl = g.clause(8, 16);
                csv_row(
                    &mut out,
                    &[format!("{i}r{seed}"), label.into(), premise, hyp, expl],
                );
            }
        }
        TaskId::Ecqa => {
            out.push_str("q_no,q_text,q_op1,q_op2,q_op3,q_op4,q_op5,q_ans,taskA_pos,taskA_neg\n");
            for i in 0..n {
                let mut q = g.clause(9, 15);
                q = format!("Where does {q}?");
                let mut opts: Vec<String> = Vec::new();
                while opts.len() < 5 {
                    let o = if g.rng.random_bool(0.5) {
                        g.pick(NOUNS).to_string()
                    } else {
                        format!("{} {}", g.pick(ADJECTIVES), g.pick(NOUNS))
                    };
                    if !opts.contains(&o) {
                        opts.push(o);
                    }
                }
                let ans = opts[g.rng.random_range(0..5)].clone();
                let pos = format!("{}. {}", g.sentence(8, 14), g.sentence(5, 9));
                let neg = g.sentence(6, 10);
                let mut row = vec![format!("q{i}-{seed}"), q];
                row.extend(opts);
                row.extend([ans, pos, neg]);
                csv_row(&mut out, &row);
            }
        }
        TaskId::Comve => {
            out.push_str("id,sentence1,sentence2,nonsensical,explanation\n");
            for i in 0..n {
                let s1 = g.sentence(6, 10);
                let s2 = g.sentence(6, 10);
                let which = if g.rng.random_bool(0.5) { "1" } else { "2" };
                let expl = g.sentence(7, 12);
                csv_row(
                    &mut out,
                    &[format!("c{i}-{seed}"), s1, s2, which.into(), expl],
                );
            }
        }
        TaskId::Sbic => {
            out.push_str(
                "post,offensiveYN,whoTarget,targetMinority,targetStereotype,annotatorID\n",
            );
            for i in 0..n {
                let post = format!("{} #{i}", g.sentence(10, 24));
                // Roughly half not offensive; offensive posts are split between
                // group-targeted and personal, with a few group frames missing a stereotype.
                let kind = g.rng.random_range(0..20);
                for a in 0..3 {
                    let (off, who, group, stereo) = match kind {
                        0..=9 => ("0.0", "", String::new(), String::new()),
                        10..=13 => ("1.0", "0.0", String::new(), String::new()),
                        14 => ("1.0", "1.0", g.pick(GROUPS).to_string(), String::new()),
                        _ => (
                            if a == 2 { "0.5" } else { "1.0" },
                            "1.0",
                            g.pick(GROUPS).to_string(),
                            format!("are {}", g.clause(4, 8)),
                        ),
                    };
                    csv_row(
                        &mut out,
                        &[
                            post.clone(),
                            off.into(),
                            who.into(),
                            group,
                            stereo,
                            format!("w{a}"),
                        ],
                    );
                }
            }
        }
    }
    out
}

/// Write a synthetic source file for `task` into `dir` and return its path.
pub fn write_source(task: TaskId, n: usize, seed: u64, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{task}-source.csv"));
    fs::write(&path, source_text(task, n, seed)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Generate and load a synthetic corpus through the task's real loader.
pub fn corpus(task: TaskId, n: usize, seed: u64, scratch: &Path) -> Result<LoadedTask> {
    let path = write_source(task, n, seed, scratch)?;
    load_task(task, &path)
}
