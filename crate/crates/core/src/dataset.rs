//! Readers for the four source datasets.
//!
//! Each reader takes a delimiter-separated file with a header row (tab for
//! `.tsv`, comma otherwise) and emits validated [`Instance`]s. Column names:
//!
//! | task  | columns used |
//! |-------|--------------|
//! | esnli | `pairID`, `gold_label`, `Sentence1`, `Sentence2`, `Explanation_1` |
//! | ecqa  | `q_no`, `q_text`, `q_op1`..`q_op5`, `q_ans`, `taskA_pos` |
//! | comve | `id`, `sentence1`, `sentence2`, `nonsensical` (`1` or `2`), `explanation` |
//! | sbic  | `post`, `offensiveYN`, `whoTarget`, `targetMinority`, `targetStereotype` |
//!
//! Extra columns are ignored. SBIC files carry one row per annotator; rows are
//! grouped by post text. Row numbers in errors and in `source_row` count data
//! rows from zero, header excluded.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::task::{TaskId, TaskSpec};
use crate::text::{collapse_whitespace, lower_first, trim_end_punct, upper_first};

pub const SBIC_NOT_OFFENSIVE: &str = "This post does not imply anything offensive.";
pub const SBIC_PERSONAL_ATTACK: &str = "This post is a personal attack.";

/// Output of [`load_task`]: the normalized corpus plus any rows that were dropped by rule.
#[derive(Debug, Clone, Default)]
pub struct LoadedTask {
    pub instances: Vec<Instance>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub row: usize,
    pub id: String,
    pub reason: String,
}

/// Social-bias frame aggregated over the annotations of one SBIC post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbicFrame {
    pub post: String,
    pub is_offensive: bool,
    pub targets_group: bool,
    pub group: Option<String>,
    pub stereotype: Option<String>,
}

/// Why a frame cannot be rewritten into an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameRejection {
    /// Group-targeted frame without a group: violates the frame invariant.
    MissingGroup,
    /// Group-targeted frame without stereotype text: skipped and logged.
    MissingStereotype,
}

impl fmt::Display for FrameRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameRejection::MissingGroup => f.write_str("group-targeted frame has no target group"),
            FrameRejection::MissingStereotype => {
                f.write_str("group-targeted frame has no stereotype text")
            }
        }
    }
}

/// Rewrite an SBIC frame into `(label, explanation)`.
///
/// Every successful result has one of exactly three explanation shapes:
/// the not-offensive sentence, the personal-attack sentence, or
/// `This post is offensive because it implies that {group} {stereotype}.`
pub fn sbic_frame_to_explanation(
    frame: &SbicFrame,
) -> std::result::Result<(String, String), FrameRejection> {
    if !frame.is_offensive {
        return Ok(("not offensive".into(), SBIC_NOT_OFFENSIVE.into()));
    }
    if !frame.targets_group {
        return Ok(("offensive".into(), SBIC_PERSONAL_ATTACK.into()));
    }
    let group = frame
        .group
        .as_deref()
        .map(|g| collapse_whitespace(trim_end_punct(g)))
        .filter(|g| !g.is_empty())
        .ok_or(FrameRejection::MissingGroup)?;
    let stereotype = frame
        .stereotype
        .as_deref()
        .map(|s| lower_first(&collapse_whitespace(trim_end_punct(s))))
        .filter(|s| !s.is_empty())
        .ok_or(FrameRejection::MissingStereotype)?;
    Ok((
        "offensive".into(),
        format!("This post is offensive because it implies that {group} {stereotype}."),
    ))
}

pub fn load_task(task: TaskId, source: &Path) -> Result<LoadedTask> {
    let text = fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    if text.trim().is_empty() {
        return Ok(LoadedTask::default());
    }
    let table = Table::parse(source, &text)?;
    let mut loaded = match task {
        TaskId::Esnli => load_esnli(&table)?,
        TaskId::Ecqa => load_ecqa(&table)?,
        TaskId::Comve => load_comve(&table)?,
        TaskId::Sbic => load_sbic(&table)?,
    };

    let spec = TaskSpec::for_task(task);
    let mut seen = HashSet::new();
    loaded.instances.retain(|inst| seen.insert(inst.id.clone()));
    loaded
        .instances
        .sort_by(|a, b| (a.source_row, &a.id).cmp(&(b.source_row, &b.id)));
    for inst in &loaded.instances {
        inst.validate(&spec)?;
    }
    Ok(loaded)
}

/// Parse `text` as a load_task-style task name and load it.
pub fn load_task_by_name(task: &str, source: &Path) -> Result<LoadedTask> {
    load_task(task.parse()?, source)
}

struct Table<'a> {
    path: &'a Path,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl<'a> Table<'a> {
    fn parse(path: &'a Path, text: &str) -> Result<Self> {
        let delimiter = match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => b'\t',
            _ => b',',
        };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .flexible(true)
            .from_reader(text.as_bytes());
        let columns = reader
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let rows = reader
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::csv(path, e))?;
        Ok(Table {
            path,
            columns,
            rows,
        })
    }

    fn malformed(&self, row: usize, field: &str, reason: impl Into<String>) -> Error {
        Error::MalformedRow {
            path: self.path.to_path_buf(),
            row,
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    fn require_columns(&self, names: &[&str]) -> Result<()> {
        for name in names {
            if !self.columns.contains_key(*name) {
                return Err(self.malformed(0, name, "column missing from header"));
            }
        }
        Ok(())
    }

    /// Whitespace-collapsed cell value; empty string when the column is short.
    fn cell(&self, row: usize, column: &str) -> String {
        self.columns
            .get(column)
            .and_then(|&i| self.rows[row].get(i))
            .map(collapse_whitespace)
            .unwrap_or_default()
    }

    fn required(&self, row: usize, column: &str) -> Result<String> {
        let v = self.cell(row, column);
        if v.is_empty() {
            Err(self.malformed(row, column, "empty value"))
        } else {
            Ok(v)
        }
    }
}

fn fields<const N: usize>(pairs: [(&str, String); N]) -> IndexMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn load_esnli(table: &Table) -> Result<LoadedTask> {
    table.require_columns(&[
        "pairID",
        "gold_label",
        "Sentence1",
        "Sentence2",
        "Explanation_1",
    ])?;
    let spec = TaskSpec::for_task(TaskId::Esnli);
    let mut out = LoadedTask::default();
    for row in 0..table.rows.len() {
        let label = table.required(row, "gold_label")?.to_lowercase();
        if !spec.has_label(&label) {
            return Err(table.malformed(row, "gold_label", format!("unknown label `{label}`")));
        }
        out.instances.push(Instance {
            id: table.required(row, "pairID")?,
            task: TaskId::Esnli,
            fields: fields([
                ("premise", table.required(row, "Sentence1")?),
                ("hypothesis", table.required(row, "Sentence2")?),
            ]),
            label,
            // Only the first annotator explanation is kept.
            explanation: upper_first(&table.required(row, "Explanation_1")?),
            source_row: Some(row),
        });
    }
    Ok(out)
}

fn load_ecqa(table: &Table) -> Result<LoadedTask> {
    table.require_columns(&[
        "q_no",
        "q_text",
        "q_op1",
        "q_op2",
        "q_op3",
        "q_op4",
        "q_op5",
        "q_ans",
        "taskA_pos",
    ])?;
    let mut out = LoadedTask::default();
    for row in 0..table.rows.len() {
        let mut f = fields([("question", table.required(row, "q_text")?)]);
        for k in 1..=5 {
            f.insert(
                format!("choice{k}"),
                table.required(row, &format!("q_op{k}"))?,
            );
        }
        let answer = table.required(row, "q_ans")?;
        if !(1..=5).any(|k| f[&format!("choice{k}")] == answer) {
            return Err(table.malformed(
                row,
                "q_ans",
                format!("`{answer}` is not one of the options"),
            ));
        }
        out.instances.push(Instance {
            id: table.required(row, "q_no")?,
            task: TaskId::Ecqa,
            fields: f,
            label: answer,
            // Positive justification only; `taskA_neg` refutes the wrong options.
            explanation: upper_first(&table.required(row, "taskA_pos")?),
            source_row: Some(row),
        });
    }
    Ok(out)
}

fn load_comve(table: &Table) -> Result<LoadedTask> {
    table.require_columns(&["id", "sentence1", "sentence2", "nonsensical", "explanation"])?;
    let mut out = LoadedTask::default();
    for row in 0..table.rows.len() {
        let label = match table.required(row, "nonsensical")?.as_str() {
            "1" => "choice1",
            "2" => "choice2",
            other => {
                return Err(table.malformed(
                    row,
                    "nonsensical",
                    format!("expected 1 or 2, got `{other}`"),
                ))
            }
        };
        out.instances.push(Instance {
            id: table.required(row, "id")?,
            task: TaskId::Comve,
            fields: fields([
                ("sentence1", table.required(row, "sentence1")?),
                ("sentence2", table.required(row, "sentence2")?),
            ]),
            label: label.to_string(),
            explanation: upper_first(&table.required(row, "explanation")?),
            source_row: Some(row),
        });
    }
    Ok(out)
}

fn parse_fraction(table: &Table, row: usize, column: &str) -> Result<Option<f64>> {
    let v = table.cell(row, column);
    if v.is_empty() {
        return Ok(None);
    }
    match v.parse::<f64>() {
        Ok(x) if (0.0..=1.0).contains(&x) => Ok(Some(x)),
        _ => Err(table.malformed(
            row,
            column,
            format!("expected a number in [0, 1], got `{v}`"),
        )),
    }
}

fn normalize_pair(group: &str, stereotype: &str) -> (String, String) {
    (
        trim_end_punct(group).to_string(),
        lower_first(trim_end_punct(stereotype)),
    )
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Stable SBIC instance id derived from the post text.
pub fn sbic_post_id(post: &str) -> String {
    let digest = Sha256::digest(post.as_bytes());
    format!("sbic-{}", &hex::encode(digest)[..16])
}

#[derive(Default)]
struct PostAnnotations {
    first_row: usize,
    offensive: Vec<f64>,
    who_target: Vec<f64>,
    pairs: Vec<(String, String)>,
}

/// Aggregate one post's annotator rows into a frame.
///
/// Offensive when the mean `offensiveYN` is at least 0.5; group-targeted when
/// the mean `whoTarget` over annotators who answered is at least 0.5. Among the
/// normalized (group, stereotype) pairs with both parts present, the
/// lexicographically first is used.
fn aggregate_post(post: &str, ann: &PostAnnotations) -> Option<SbicFrame> {
    let offensive = mean(&ann.offensive)?;
    let is_offensive = offensive >= 0.5;
    let targets_group = is_offensive && mean(&ann.who_target).is_some_and(|w| w >= 0.5);
    let chosen = ann
        .pairs
        .iter()
        .filter(|(_, s)| !s.is_empty())
        .min()
        .cloned();
    let group = chosen
        .as_ref()
        .map(|(g, _)| g.clone())
        .or_else(|| ann.pairs.iter().map(|(g, _)| g.clone()).min());
    Some(SbicFrame {
        post: post.to_string(),
        is_offensive,
        targets_group,
        group,
        stereotype: chosen.map(|(_, s)| s),
    })
}

fn load_sbic(table: &Table) -> Result<LoadedTask> {
    table.require_columns(&[
        "post",
        "offensiveYN",
        "whoTarget",
        "targetMinority",
        "targetStereotype",
    ])?;
    let mut posts: BTreeMap<String, PostAnnotations> = BTreeMap::new();
    for row in 0..table.rows.len() {
        let post = table.required(row, "post")?;
        let offensive = parse_fraction(table, row, "offensiveYN")?;
        let who = parse_fraction(table, row, "whoTarget")?;
        let entry = posts.entry(post).or_insert_with(|| PostAnnotations {
            first_row: row,
            ..Default::default()
        });
        entry.offensive.extend(offensive);
        entry.who_target.extend(who);
        let group = table.cell(row, "targetMinority");
        if !group.is_empty() {
            entry
                .pairs
                .push(normalize_pair(&group, &table.cell(row, "targetStereotype")));
        }
    }

    let mut out = LoadedTask::default();
    for (post, ann) in &posts {
        let id = sbic_post_id(post);
        let Some(frame) = aggregate_post(post, ann) else {
            return Err(table.malformed(
                ann.first_row,
                "offensiveYN",
                "no annotator rated this post",
            ));
        };
        match sbic_frame_to_explanation(&frame) {
            Ok((label, explanation)) => out.instances.push(Instance {
                id,
                task: TaskId::Sbic,
                fields: fields([("post", post.clone())]),
                label,
                explanation,
                source_row: Some(ann.first_row),
            }),
            Err(reason) => out.skipped.push(SkipRecord {
                row: ann.first_row,
                id,
                reason: reason.to_string(),
            }),
        }
    }
    out.skipped.sort_by_key(|s| s.row);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_source(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        (dir, path)
    }

    fn frame(off: bool, group: bool, g: Option<&str>, s: Option<&str>) -> SbicFrame {
        SbicFrame {
            post: "p".into(),
            is_offensive: off,
            targets_group: group,
            group: g.map(Into::into),
            stereotype: s.map(Into::into),
        }
    }

    #[test]
    fn sbic_three_sentence_shapes() {
        assert_eq!(
            sbic_frame_to_explanation(&frame(false, false, None, None)).unwrap(),
            (
                "not offensive".into(),
                "This post does not imply anything offensive.".into()
            )
        );
        assert_eq!(
            sbic_frame_to_explanation(&frame(true, false, None, None)).unwrap(),
            ("offensive".into(), "This post is a personal attack.".into())
        );
        assert_eq!(
            sbic_frame_to_explanation(&frame(true, true, Some("women"), Some("can't drive")))
                .unwrap(),
            (
                "offensive".into(),
                "This post is offensive because it implies that women can't drive.".into()
            )
        );
    }

    #[test]
    fn sbic_stereotype_cleanup() {
        let (_, e) =
            sbic_frame_to_explanation(&frame(true, true, Some("women"), Some("Can't drive!!  ")))
                .unwrap();
        assert_eq!(
            e,
            "This post is offensive because it implies that women can't drive."
        );
    }

    #[test]
    fn sbic_degenerate_frames() {
        assert_eq!(
            sbic_frame_to_explanation(&frame(true, true, Some("women"), None)),
            Err(FrameRejection::MissingStereotype)
        );
        assert_eq!(
            sbic_frame_to_explanation(&frame(true, true, Some("women"), Some(" . "))),
            Err(FrameRejection::MissingStereotype)
        );
        assert_eq!(
            sbic_frame_to_explanation(&frame(true, true, None, Some("x"))),
            Err(FrameRejection::MissingGroup)
        );
    }

    #[test]
    fn ecqa_keeps_positive_justification_only() {
        let (_d, path) = write_source(
            "ecqa.csv",
            "q_no,q_text,q_op1,q_op2,q_op3,q_op4,q_op5,q_ans,taskA_pos,taskA_neg\n\
             q1,Where do you keep milk?,fridge,oven,shelf,car,roof,fridge,\"A fridge keeps milk cold.\nMilk spoils when warm.\",An oven is hot.\n",
        );
        let loaded = load_task(TaskId::Ecqa, &path).unwrap();
        assert_eq!(loaded.instances.len(), 1);
        let inst = &loaded.instances[0];
        assert_eq!(inst.label, "fridge");
        assert_eq!(
            inst.explanation,
            "A fridge keeps milk cold. Milk spoils when warm."
        );
        assert!(!inst.explanation.contains("oven"));
    }

    #[test]
    fn comve_field_mapping() {
        let (_d, path) = write_source(
            "comve.csv",
            "id,sentence1,sentence2,nonsensical,explanation\n\
             7,The stove was cleaned with a cleaner.,The stove was cleaned with a mop.,2,A mop is too large to clean the stove.\n\
             8,He drank milk.,He drank a chair.,2,a chair is not a drink.\n\
             9,Fish fly in the sky.,Birds fly in the sky.,1,Fish live in water.\n",
        );
        let loaded = load_task(TaskId::Comve, &path).unwrap();
        let got: Vec<_> = loaded
            .instances
            .iter()
            .map(|i| (i.id.as_str(), i.label.as_str(), i.explanation.as_str()))
            .collect();
        assert_eq!(
            got,
            vec![
                ("7", "choice2", "A mop is too large to clean the stove."),
                ("8", "choice2", "A chair is not a drink."),
                ("9", "choice1", "Fish live in water."),
            ]
        );
        assert_eq!(
            loaded.instances[0].field("sentence2").unwrap(),
            "The stove was cleaned with a mop."
        );
    }

    #[test]
    fn esnli_uses_first_explanation_and_dedups() {
        let (_d, path) = write_source(
            "esnli.csv",
            "pairID,gold_label,Sentence1,Sentence2,Explanation_1,Explanation_2\n\
             p1,entailment,A man sleeps.,A person rests.,A man is a person.,Sleeping is resting.\n\
             p1,entailment,A man sleeps.,A person rests.,duplicate,dup\n\
             p2,contradiction,A dog runs.,A cat sits.,Dogs are not cats.,x\n",
        );
        let loaded = load_task(TaskId::Esnli, &path).unwrap();
        assert_eq!(loaded.instances.len(), 2);
        assert_eq!(loaded.instances[0].explanation, "A man is a person.");
        assert_eq!(loaded.instances[1].label, "contradiction");
    }

    #[test]
    fn empty_source_is_empty_corpus() {
        let (_d, path) = write_source("esnli.csv", "");
        assert!(load_task(TaskId::Esnli, &path)
            .unwrap()
            .instances
            .is_empty());
    }

    #[test]
    fn malformed_row_names_row_and_field() {
        let (_d, path) = write_source(
            "comve.csv",
            "id,sentence1,sentence2,nonsensical,explanation\n\
             1,a,b,2,ok\n\
             2,a,b,3,ok\n",
        );
        match load_task(TaskId::Comve, &path).unwrap_err() {
            Error::MalformedRow { row, field, .. } => {
                assert_eq!(row, 1);
                assert_eq!(field, "nonsensical");
            }
            other => panic!("unexpected {other}"),
        }

        let (_d, path) = write_source(
            "comve.csv",
            "id,sentence1,sentence2,nonsensical,explanation\n1,a,,2,ok\n",
        );
        assert!(matches!(
            load_task(TaskId::Comve, &path).unwrap_err(),
            Error::MalformedRow { row: 0, ref field, .. } if field == "sentence2"
        ));
    }

    #[test]
    fn unknown_task_name_errors() {
        let (_d, path) = write_source("x.csv", "a\n1\n");
        assert!(matches!(
            load_task_by_name("cose", &path),
            Err(Error::UnknownTask(_))
        ));
    }

    #[test]
    fn sbic_groups_annotator_rows() {
        let (_d, path) = write_source(
            "sbic.csv",
            "post,offensiveYN,whoTarget,targetMinority,targetStereotype\n\
             you are dumb,1.0,0.0,,\n\
             you are dumb,0.5,0.0,,\n\
             nice day,0.0,,,\n\
             nice day,0.0,,,\n\
             group post,1.0,1.0,women,Can't drive.\n\
             group post,1.0,1.0,women,are bad at math\n\
             vague post,1.0,1.0,women,\n\
             borderline,0.5,,,\n\
             borderline,0.0,,,\n",
        );
        let loaded = load_task(TaskId::Sbic, &path).unwrap();
        let by_post: HashMap<_, _> = loaded
            .instances
            .iter()
            .map(|i| {
                (
                    i.field("post").unwrap().to_string(),
                    (i.label.clone(), i.explanation.clone()),
                )
            })
            .collect();
        assert_eq!(by_post["you are dumb"].1, SBIC_PERSONAL_ATTACK);
        assert_eq!(by_post["nice day"].1, SBIC_NOT_OFFENSIVE);
        // Normalized ("women", "are bad at math") sorts before ("women", "can't drive").
        assert_eq!(
            by_post["group post"].1,
            "This post is offensive because it implies that women are bad at math."
        );
        assert_eq!(by_post["borderline"].0, "not offensive");
        assert_eq!(loaded.skipped.len(), 1);
        assert_eq!(loaded.skipped[0].row, 6);
        // Source order, not lexicographic post order.
        let rows: Vec<_> = loaded
            .instances
            .iter()
            .map(|i| i.source_row.unwrap())
            .collect();
        assert_eq!(rows, vec![0, 2, 4, 7]);
    }
}
