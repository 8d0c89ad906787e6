//! Accuracy and zeroed explanation similarity, per instance, split and benchmark.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::parse::Prediction;
use crate::task::TaskId;

/// Token-multiset F1 after lowercasing and stripping punctuation.
pub fn lexical_f1(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &c {
        if let Some(n) = counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / c.len() as f64;
    let r = overlap as f64 / r.len() as f64;
    2.0 * p * r / (p + r)
}

fn tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// One candidate/reference pair, also the scorer protocol's request record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

/// Scorer protocol response record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub score: f64,
}

/// First line of every scorer response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerHandshake {
    pub scorer: String,
    pub version: String,
}

pub trait SimilarityScorer: Send + Sync {
    /// Name recorded in reports.
    fn identity(&self) -> String;
    /// One score in [0,1] per pair, in input order.
    fn score_batch(&self, pairs: &[ScorePair]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalF1Scorer;

impl SimilarityScorer for LexicalF1Scorer {
    fn identity(&self) -> String {
        "lexical_f1".into()
    }

    fn score_batch(&self, pairs: &[ScorePair]) -> Result<Vec<f64>> {
        Ok(pairs
            .iter()
            .map(|p| lexical_f1(&p.candidate, &p.reference))
            .collect())
    }
}

/// Moves a serialized request batch to a scorer endpoint and returns its raw reply.
pub trait ScorerTransport: Send + Sync {
    fn describe(&self) -> String;
    fn exchange(&self, request: &str) -> Result<String>;
}

/// Runs a scorer command per batch, JSONL requests on stdin, JSONL responses on stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTransport {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandTransport {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        CommandTransport {
            program: program.into(),
            args,
        }
    }
}

impl ScorerTransport for CommandTransport {
    fn describe(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn exchange(&self, request: &str) -> Result<String> {
        let fail = |reason: String| Error::ScorerProtocol(format!("{}: {reason}", self.describe()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(format!("spawn failed: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let payload = request.to_string();
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));
        let mut out = String::new();
        child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_string(&mut out)
            .map_err(|e| fail(format!("read failed: {e}")))?;
        let status = child.wait().map_err(|e| fail(e.to_string()))?;
        writer
            .join()
            .map_err(|_| fail("writer thread panicked".into()))?
            .map_err(|e| fail(format!("write failed: {e}")))?;
        if !status.success() {
            return Err(fail(format!("exited with {status}")));
        }
        Ok(out)
    }
}

/// Score `pairs` through an external endpoint, retrying once on transport failure.
pub fn external_score_batch(
    pairs: &[ScorePair],
    transport: &dyn ScorerTransport,
) -> Result<(ScorerHandshake, Vec<ScoreRecord>)> {
    let mut request = String::new();
    for p in pairs {
        request.push_str(&serde_json::to_string(p).expect("serializable"));
        request.push('\n');
    }
    let reply = match transport.exchange(&request) {
        Ok(r) => r,
        Err(_) => transport.exchange(&request)?,
    };
    let mut lines = reply.lines().filter(|l| !l.trim().is_empty());
    let handshake: ScorerHandshake = match lines.next() {
        Some(l) => serde_json::from_str(l)
            .map_err(|e| Error::ScorerProtocol(format!("bad handshake `{l}`: {e}")))?,
        None => return Err(Error::ScorerProtocol("empty response, no handshake".into())),
    };

    let wanted: HashSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    let mut got: HashMap<String, f64> = HashMap::new();
    for l in lines {
        let rec: ScoreRecord = serde_json::from_str(l)
            .map_err(|e| Error::ScorerProtocol(format!("bad response record `{l}`: {e}")))?;
        if !wanted.contains(rec.id.as_str()) {
            return Err(Error::Scorer {
                id: rec.id,
                reason: "response for unknown id".into(),
            });
        }
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(Error::Scorer {
                id: rec.id,
                reason: format!("score {} outside [0,1]", rec.score),
            });
        }
        if got.insert(rec.id.clone(), rec.score).is_some() {
            return Err(Error::Scorer {
                id: rec.id,
                reason: "duplicate response".into(),
            });
        }
    }
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        match got.get(&p.id) {
            Some(&score) => out.push(ScoreRecord {
                id: p.id.clone(),
                score,
            }),
            None => {
                return Err(Error::Scorer {
                    id: p.id.clone(),
                    reason: "missing from scorer response".into(),
                })
            }
        }
    }
    Ok((handshake, out))
}

/// A [`SimilarityScorer`] backed by an external endpoint. Requests are serialized.
pub struct ExternalScorer<T: ScorerTransport> {
    transport: T,
    queue: Mutex<Option<ScorerHandshake>>,
}

impl<T: ScorerTransport> ExternalScorer<T> {
    pub fn new(transport: T) -> Self {
        ExternalScorer {
            transport,
            queue: Mutex::new(None),
        }
    }

    /// The handshake of the most recent batch, if any was sent.
    pub fn handshake(&self) -> Option<ScorerHandshake> {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl<T: ScorerTransport> SimilarityScorer for ExternalScorer<T> {
    fn identity(&self) -> String {
        format!("external:{}", self.transport.describe())
    }

    fn score_batch(&self, pairs: &[ScorePair]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let mut seen = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        let (handshake, records) = external_score_batch(pairs, &self.transport)?;
        *seen = Some(handshake);
        Ok(records.into_iter().map(|r| r.score).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    #[serde(rename = "id")]
    pub instance_id: String,
    pub gold_label: String,
    pub correct: bool,
    pub similarity: f64,
}

fn check_pair(prediction: &Prediction, gold: &Instance) -> Result<()> {
    if prediction.instance_id != gold.id {
        return Err(Error::Scorer {
            id: prediction.instance_id.clone(),
            reason: format!("prediction paired with gold instance `{}`", gold.id),
        });
    }
    Ok(())
}

fn is_correct(prediction: &Prediction, gold: &Instance) -> bool {
    prediction.label.as_deref() == Some(gold.label.as_str())
}

pub fn score_instance(
    prediction: &Prediction,
    gold: &Instance,
    scorer: &dyn SimilarityScorer,
) -> Result<InstanceScore> {
    Ok(score_split(std::slice::from_ref(prediction), &[gold], scorer)?.remove(0))
}

/// Score aligned predictions and gold instances with one scorer call.
///
/// Only correctly labeled pairs reach the scorer.
pub fn score_split(
    predictions: &[Prediction],
    golds: &[&Instance],
    scorer: &dyn SimilarityScorer,
) -> Result<Vec<InstanceScore>> {
    if predictions.len() != golds.len() {
        return Err(Error::Aggregation(format!(
            "{} predictions for {} gold instances",
            predictions.len(),
            golds.len()
        )));
    }
    let mut pairs = Vec::new();
    for (p, g) in predictions.iter().zip(golds) {
        check_pair(p, g)?;
        if is_correct(p, g) {
            pairs.push(ScorePair {
                id: p.instance_id.clone(),
                candidate: p.explanation.clone(),
                reference: g.explanation.clone(),
            });
        }
    }
    let sims = scorer.score_batch(&pairs)?;
    if sims.len() != pairs.len() {
        return Err(Error::ScorerProtocol(format!(
            "{} returned {} scores for {} pairs",
            scorer.identity(),
            sims.len(),
            pairs.len()
        )));
    }
    let mut sims = sims.into_iter().zip(&pairs);
    let mut out = Vec::with_capacity(predictions.len());
    for (p, g) in predictions.iter().zip(golds) {
        let correct = is_correct(p, g);
        let similarity = if correct {
            let (s, pair) = sims.next().expect("one score per correct pair");
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Scorer {
                    id: pair.id.clone(),
                    reason: format!("score {s} outside [0,1]"),
                });
            }
            s
        } else {
            0.0
        };
        out.push(InstanceScore {
            instance_id: p.instance_id.clone(),
            gold_label: g.label.clone(),
            correct,
            similarity,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub n: usize,
    pub accuracy_mean: f64,
    pub similarity_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub split_index: usize,
    pub n: usize,
    pub accuracy_mean: f64,
    pub similarity_mean: f64,
    /// Means restricted to dev instances of each gold label.
    pub per_label: BTreeMap<String, LabelScore>,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn label_score(scores: &[&InstanceScore]) -> LabelScore {
    let acc: Vec<f64> = scores
        .iter()
        .map(|s| f64::from(u8::from(s.correct)))
        .collect();
    let sim: Vec<f64> = scores.iter().map(|s| s.similarity).collect();
    LabelScore {
        n: scores.len(),
        accuracy_mean: mean(&acc),
        similarity_mean: mean(&sim),
    }
}

pub fn aggregate_split(
    split_index: usize,
    scores: &[InstanceScore],
    dev_size: usize,
) -> Result<SplitScore> {
    if scores.len() != dev_size {
        return Err(Error::Aggregation(format!(
            "split {split_index}: {} instance scores for a dev set of {dev_size}",
            scores.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Aggregation(format!(
            "split {split_index}: empty dev set"
        )));
    }
    let all: Vec<&InstanceScore> = scores.iter().collect();
    let overall = label_score(&all);
    let mut by_label: BTreeMap<String, Vec<&InstanceScore>> = BTreeMap::new();
    for s in scores {
        by_label.entry(s.gold_label.clone()).or_default().push(s);
    }
    Ok(SplitScore {
        split_index,
        n: scores.len(),
        accuracy_mean: overall.accuracy_mean,
        similarity_mean: overall.similarity_mean,
        per_label: by_label
            .into_iter()
            .map(|(l, v)| (l, label_score(&v)))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Mean and standard error (sample stdev, ddof=1, over sqrt(n)).
pub fn mean_se(values: &[f64]) -> Result<MeanSe> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Aggregation(format!(
            "standard error needs at least 2 values, got {n}"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(MeanSe {
            mean: lo,
            se: 0.0,
            n,
        });
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    let var = mean(&sq) * n as f64 / (n - 1) as f64;
    Ok(MeanSe {
        mean: m,
        se: var.sqrt() / (n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub se: f64,
    /// Per gold label, over the splits whose dev set contains that label.
    pub per_label: BTreeMap<String, MeanSe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub task: TaskId,
    pub variant: String,
    pub scorer: String,
    pub n_splits: usize,
    pub accuracy: MetricSummary,
    pub similarity: MetricSummary,
}

fn summarize(
    splits: &[SplitScore],
    overall: impl Fn(&SplitScore) -> f64,
    label: impl Fn(&LabelScore) -> f64,
) -> Result<MetricSummary> {
    let all: Vec<f64> = splits.iter().map(&overall).collect();
    let ms = mean_se(&all)?;
    let mut by_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in splits {
        for (l, ls) in &s.per_label {
            by_label.entry(l.clone()).or_default().push(label(ls));
        }
    }
    let mut per_label = BTreeMap::new();
    for (l, v) in by_label {
        if v.len() >= 2 {
            per_label.insert(l, mean_se(&v)?);
        }
    }
    Ok(MetricSummary {
        mean: ms.mean,
        se: ms.se,
        per_label,
    })
}

pub fn aggregate_benchmark(
    task: TaskId,
    variant: &str,
    scorer: &str,
    split_scores: &[SplitScore],
) -> Result<BenchmarkReport> {
    let mut seen = HashSet::new();
    for s in split_scores {
        if !seen.insert(s.split_index) {
            return Err(Error::Aggregation(format!(
                "split {} scored twice",
                s.split_index
            )));
        }
    }
    Ok(BenchmarkReport {
        task,
        variant: variant.to_string(),
        scorer: scorer.to_string(),
        n_splits: split_scores.len(),
        accuracy: summarize(split_scores, |s| s.accuracy_mean, |l| l.accuracy_mean)?,
        similarity: summarize(split_scores, |s| s.similarity_mean, |l| l.similarity_mean)?,
    })
}

/// Format a unit-interval value the way tables report it: x100, one decimal.
pub fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

impl BenchmarkReport {
    /// Tab-separated rows `metric, label, mean, se`; label `all` for the overall row.
    pub fn to_table(&self) -> String {
        let mut out = String::from("metric\tlabel\tmean\tse\n");
        for (name, m) in [
            ("accuracy", &self.accuracy),
            ("similarity", &self.similarity),
        ] {
            let _ = writeln!(out, "{name}\tall\t{}\t{}", pct(m.mean), pct(m.se));
            for (l, ms) in &m.per_label {
                let _ = writeln!(out, "{name}\t{l}\t{}\t{}", pct(ms.mean), pct(ms.se));
            }
        }
        out
    }
}
