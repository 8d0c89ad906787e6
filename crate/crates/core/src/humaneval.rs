//! Plausibility evaluation bookkeeping: item selection, annotation batches,
//! judgment ingestion, and agreement statistics.
//!
//! Batch files are CSV with the header
//! `item_id,task,<field columns>,label,explanation_a,explanation_b,step1_required,step1_options`.
//! Raters return the same rows with `rater_id`, `step1_answer`, `rating_a` and
//! `rating_b` appended. Ratings are one of `yes`, `weak_yes`, `weak_no`, `no`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Corpus;
use crate::metrics::{mean_se, MeanSe};
use crate::parse::Prediction;
use crate::task::{TaskId, TaskSpec};
use crate::text::normalize_label_text;

pub const ITEMS_PER_SPLIT: usize = 6;
pub const RATERS_PER_ITEM: usize = 3;
pub const BATCH_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlausibilityOption {
    Yes,
    WeakYes,
    WeakNo,
    No,
}

impl PlausibilityOption {
    pub const ALL: [PlausibilityOption; 4] = [Self::Yes, Self::WeakYes, Self::WeakNo, Self::No];

    pub fn score(self) -> f64 {
        match self {
            Self::Yes => 1.0,
            Self::WeakYes => 2.0 / 3.0,
            Self::WeakNo => 1.0 / 3.0,
            Self::No => 0.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Yes => "yes",
            Self::WeakYes => "weak_yes",
            Self::WeakNo => "weak_no",
            Self::No => "no",
        }
    }
}

impl FromStr for PlausibilityOption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_lowercase().replace([' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|o| o.as_str() == norm)
            .ok_or_else(|| Error::Annotation(format!("unknown rating `{s}`")))
    }
}

impl fmt::Display for PlausibilityOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
}

/// Predictions for one split, in the split's persisted dev order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPredictions {
    pub split_index: usize,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub item_id: String,
    pub task: TaskId,
    pub split_index: usize,
    pub instance_id: String,
    pub fields: IndexMap<String, String>,
    pub gold_label: String,
    pub explanation_a: String,
    pub explanation_b: String,
    /// Which slot holds the gold explanation. Not shown to raters.
    pub gold_slot: Slot,
    pub step1_required: bool,
}

impl AnnotationItem {
    pub fn explanation(&self, slot: Slot) -> &str {
        match slot {
            Slot::A => &self.explanation_a,
            Slot::B => &self.explanation_b,
        }
    }

    pub fn generated_slot(&self) -> Slot {
        match self.gold_slot {
            Slot::A => Slot::B,
            Slot::B => Slot::A,
        }
    }
}

/// A split whose selection could not keep per-label balance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Imbalance {
    pub split_index: usize,
    pub per_label: BTreeMap<String, usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub seed: u64,
    pub items: Vec<AnnotationItem>,
    pub imbalances: Vec<Imbalance>,
}

fn label_quota(spec: &TaskSpec) -> Option<usize> {
    spec.is_classification
        .then(|| ITEMS_PER_SPLIT / spec.label_set.len())
}

/// Pick the first correct predictions of each split in dev order, balanced
/// per gold label for classification tasks.
///
/// A split short of a label's quota is topped up from later correct
/// predictions of any label, and the imbalance is reported.
pub fn select_eval_items(
    predictions_by_split: &[SplitPredictions],
    corpus: &Corpus,
    spec: &TaskSpec,
    seed: u64,
) -> Result<Selection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    let mut imbalances = Vec::new();
    let mut empty = Vec::new();

    for sp in predictions_by_split {
        let mut correct = Vec::new();
        for p in &sp.predictions {
            let gold = corpus.get(&p.instance_id)?;
            if p.label.as_deref() == Some(gold.label.as_str()) {
                correct.push((p, gold));
            }
        }
        if correct.is_empty() {
            empty.push(sp.split_index);
            continue;
        }

        let mut taken = vec![false; correct.len()];
        let mut per_label: BTreeMap<String, usize> = BTreeMap::new();
        let mut total = 0;
        match label_quota(spec) {
            Some(quota) => {
                for (k, (_, gold)) in correct.iter().enumerate() {
                    let n = per_label.entry(gold.label.clone()).or_default();
                    if *n < quota {
                        *n += 1;
                        taken[k] = true;
                        total += 1;
                    }
                }
                let balanced = total == ITEMS_PER_SPLIT;
                for (k, (_, gold)) in correct.iter().enumerate() {
                    if total == ITEMS_PER_SPLIT {
                        break;
                    }
                    if !taken[k] {
                        taken[k] = true;
                        total += 1;
                        *per_label.entry(gold.label.clone()).or_default() += 1;
                    }
                }
                if !balanced {
                    imbalances.push(Imbalance {
                        split_index: sp.split_index,
                        per_label: per_label.clone(),
                        total,
                    });
                }
            }
            None => {
                for t in taken.iter_mut().take(ITEMS_PER_SPLIT) {
                    *t = true;
                    total += 1;
                }
                if total < ITEMS_PER_SPLIT {
                    imbalances.push(Imbalance {
                        split_index: sp.split_index,
                        per_label: BTreeMap::new(),
                        total,
                    });
                }
            }
        }

        let chosen = correct.iter().zip(&taken).filter(|(_, t)| **t);
        for (k_item, ((p, gold), _)) in chosen.enumerate() {
            let gold_slot = if rng.random_bool(0.5) {
                Slot::A
            } else {
                Slot::B
            };
            let (a, b) = match gold_slot {
                Slot::A => (gold.explanation.clone(), p.explanation.clone()),
                Slot::B => (p.explanation.clone(), gold.explanation.clone()),
            };
            items.push(AnnotationItem {
                item_id: format!("{}-{:02}-{}", spec.task_id, sp.split_index, k_item),
                task: spec.task_id,
                split_index: sp.split_index,
                instance_id: gold.id.clone(),
                fields: gold.fields.clone(),
                gold_label: gold.label.clone(),
                explanation_a: a,
                explanation_b: b,
                gold_slot,
                step1_required: spec.task_id != TaskId::Ecqa,
            });
        }
    }
    if !empty.is_empty() {
        return Err(Error::NoCorrectPredictions(empty));
    }
    Ok(Selection {
        seed,
        items,
        imbalances,
    })
}

/// Step 1 choices shown to raters: the task's labels, or the instance's answer choices.
fn step1_options(item: &AnnotationItem) -> Vec<String> {
    if !item.step1_required {
        return Vec::new();
    }
    TaskSpec::for_task(item.task).label_set
}

fn batch_header(item: &AnnotationItem) -> Vec<String> {
    let mut h = vec!["item_id".to_string(), "task".to_string()];
    h.extend(item.fields.keys().cloned());
    h.extend(
        [
            "label",
            "explanation_a",
            "explanation_b",
            "step1_required",
            "step1_options",
        ]
        .map(String::from),
    );
    h
}

fn batch_row(item: &AnnotationItem) -> Vec<String> {
    let mut r = vec![item.item_id.clone(), item.task.to_string()];
    r.extend(item.fields.values().cloned());
    r.push(item.gold_label.clone());
    r.push(item.explanation_a.clone());
    r.push(item.explanation_b.clone());
    r.push(item.step1_required.to_string());
    r.push(step1_options(item).join("|"));
    r
}

pub fn batch_file_name(index: usize) -> String {
    format!("batch_{index:03}.csv")
}

pub const KEY_FILE: &str = "key.csv";

/// Write `items` as CSV batches of `batch_size` into `dir`, plus the hidden
/// provenance key. Returns the batch paths in order.
pub fn emit_batches(
    items: &[AnnotationItem],
    batch_size: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if batch_size == 0 {
        return Err(Error::Annotation("batch size must be positive".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (i, chunk) in items.chunks(batch_size).enumerate() {
        let path = dir.join(batch_file_name(i));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(batch_header(&chunk[0]))
            .map_err(|e| Error::csv(&path, e))?;
        for item in chunk {
            w.write_record(batch_row(item))
                .map_err(|e| Error::csv(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }

    let key = dir.join(KEY_FILE);
    let mut w = csv::Writer::from_path(&key).map_err(|e| Error::csv(&key, e))?;
    w.write_record(["item_id", "split_index", "instance_id", "gold_slot"])
        .map_err(|e| Error::csv(&key, e))?;
    for item in items {
        let slot = match item.gold_slot {
            Slot::A => "a",
            Slot::B => "b",
        };
        w.write_record([
            item.item_id.as_str(),
            &item.split_index.to_string(),
            &item.instance_id,
            slot,
        ])
        .map_err(|e| Error::csv(&key, e))?;
    }
    w.flush().map_err(|e| Error::io(&key, e))?;
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub item_id: String,
    pub rater_id: String,
    pub step1_answer: Option<String>,
    pub gold: PlausibilityOption,
    pub generated: PlausibilityOption,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedResponse {
    pub item_id: String,
    pub rater_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub judgments: Vec<Judgment>,
    pub rejected: Vec<RejectedResponse>,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Annotation(format!("{}: missing column `{name}`", path.display())))
}

/// Read rater result files and map slot ratings back to gold/generated.
///
/// Responses whose Step 1 answer disagrees with the gold label are dropped
/// and listed in `rejected`.
pub fn ingest_annotations(paths: &[PathBuf], items: &[AnnotationItem]) -> Result<Ingested> {
    let by_id: HashMap<&str, &AnnotationItem> =
        items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut seen = HashSet::new();
    let mut judgments = Vec::new();
    let mut rejected = Vec::new();

    for path in paths {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        let c_item = column(&headers, "item_id", path)?;
        let c_rater = column(&headers, "rater_id", path)?;
        let c_a = column(&headers, "rating_a", path)?;
        let c_b = column(&headers, "rating_b", path)?;
        let c_step1 = headers.iter().position(|h| h == "step1_answer");

        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let at = |what: &str| format!("{}: row {}: {what}", path.display(), row + 2);
            let get = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
            let item_id = get(c_item);
            let item = by_id
                .get(item_id)
                .ok_or_else(|| Error::Annotation(at(&format!("unknown item `{item_id}`"))))?;
            let rater_id = get(c_rater);
            if rater_id.is_empty() {
                return Err(Error::Annotation(at("missing rater_id")));
            }
            for (c, name) in [(c_a, "rating_a"), (c_b, "rating_b")] {
                if get(c).is_empty() {
                    return Err(Error::Annotation(at(&format!("missing {name}"))));
                }
            }
            let rating_a: PlausibilityOption = get(c_a).parse()?;
            let rating_b: PlausibilityOption = get(c_b).parse()?;
            if !seen.insert((item_id.to_string(), rater_id.to_string())) {
                return Err(Error::Annotation(at(&format!(
                    "duplicate response from `{rater_id}` for `{item_id}`"
                ))));
            }
            let step1 = c_step1
                .map(get)
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            if item.step1_required {
                match &step1 {
                    None => return Err(Error::Annotation(at("missing step1_answer"))),
                    Some(ans)
                        if normalize_label_text(ans) != normalize_label_text(&item.gold_label) =>
                    {
                        rejected.push(RejectedResponse {
                            item_id: item_id.into(),
                            rater_id: rater_id.into(),
                            reason: format!(
                                "step 1 answer `{ans}` does not match `{}`",
                                item.gold_label
                            ),
                        });
                        continue;
                    }
                    Some(_) => {}
                }
            }
            let (gold, generated) = match item.gold_slot {
                Slot::A => (rating_a, rating_b),
                Slot::B => (rating_b, rating_a),
            };
            judgments.push(Judgment {
                item_id: item_id.into(),
                rater_id: rater_id.into(),
                step1_answer: step1,
                gold,
                generated,
            });
        }
    }
    Ok(Ingested {
        judgments,
        rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub mean: f64,
    pub se: f64,
    pub per_label: BTreeMap<String, MeanSe>,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityReport {
    pub n_items: usize,
    pub gold: SourceReport,
    pub generated: SourceReport,
}

/// Fleiss' kappa over per-item category counts, each row summing to `raters`.
///
/// When every rating falls in one category the chance agreement is 1 and
/// kappa is defined as 1.
pub fn fleiss_kappa(counts: &[[usize; 4]], raters: usize) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::Kappa("no items".into()));
    }
    if raters < 2 {
        return Err(Error::Kappa("need at least 2 raters".into()));
    }
    let r = raters as f64;
    let n = counts.len() as f64;
    let mut totals = [0usize; 4];
    let mut p_bar = 0.0;
    for (i, row) in counts.iter().enumerate() {
        let sum: usize = row.iter().sum();
        if sum != raters {
            return Err(Error::Kappa(format!(
                "row {i} sums to {sum}, expected {raters}"
            )));
        }
        let agree: usize = row.iter().map(|c| c * c).sum::<usize>() - raters;
        p_bar += agree as f64 / (r * (r - 1.0));
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    p_bar /= n;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (n * r);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

fn source_report(
    items: &[&AnnotationItem],
    by_item: &HashMap<&str, Vec<&Judgment>>,
    spec: &TaskSpec,
    pick: impl Fn(&Judgment) -> PlausibilityOption,
) -> Result<SourceReport> {
    let mut means = Vec::with_capacity(items.len());
    let mut counts = Vec::with_capacity(items.len());
    let mut per_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for item in items {
        let js = &by_item[item.item_id.as_str()];
        let m = js.iter().map(|j| pick(j).score()).sum::<f64>() / js.len() as f64;
        let mut row = [0usize; 4];
        for j in js {
            row[pick(j).index()] += 1;
        }
        counts.push(row);
        means.push(m);
        if spec.is_classification {
            per_label
                .entry(item.gold_label.clone())
                .or_default()
                .push(m);
        }
    }
    let ms = mean_se(&means)?;
    let mut labels = BTreeMap::new();
    for (l, v) in per_label {
        if v.len() >= 2 {
            labels.insert(l, mean_se(&v)?);
        }
    }
    Ok(SourceReport {
        mean: ms.mean,
        se: ms.se,
        per_label: labels,
        kappa: fleiss_kappa(&counts, RATERS_PER_ITEM)?,
    })
}

/// Per-item rater means, their mean and standard error, per gold label, and
/// Fleiss' kappa, for the gold and the generated explanation.
pub fn plausibility_report(
    judgments: &[Judgment],
    items: &[AnnotationItem],
    spec: &TaskSpec,
) -> Result<PlausibilityReport> {
    let mut by_item: HashMap<&str, Vec<&Judgment>> = HashMap::new();
    for j in judgments {
        by_item.entry(j.item_id.as_str()).or_default().push(j);
    }
    let known: HashSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
    if let Some(j) = judgments
        .iter()
        .find(|j| !known.contains(j.item_id.as_str()))
    {
        return Err(Error::Annotation(format!(
            "judgment for unknown item `{}`",
            j.item_id
        )));
    }
    let rated: Vec<&AnnotationItem> = items
        .iter()
        .filter(|i| by_item.contains_key(i.item_id.as_str()))
        .collect();
    let mut bad: Vec<String> = Vec::new();
    for item in items {
        let n = by_item.get(item.item_id.as_str()).map_or(0, Vec::len);
        if n != RATERS_PER_ITEM {
            bad.push(format!("{} ({n})", item.item_id));
        }
    }
    if !bad.is_empty() {
        return Err(Error::Annotation(format!(
            "items without exactly {RATERS_PER_ITEM} ratings: {}",
            bad.join(", ")
        )));
    }
    Ok(PlausibilityReport {
        n_items: rated.len(),
        gold: source_report(&rated, &by_item, spec, |j| j.gold)?,
        generated: source_report(&rated, &by_item, spec, |j| j.generated)?,
    })
}
