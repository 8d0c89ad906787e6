//! End-to-end runs: split, render, respond, parse, score, aggregate.
//!
//! Everything a run produces lives under `output_dir`:
//!
//! ```text
//! config.json  splits.jsonl  digests.json  report.json  report.tsv  manifest.json
//! splits/NN-<digest12>/
//!     train.jsonl requests.jsonl gold.jsonl exchange.json
//!     responses.jsonl predictions.jsonl scores.jsonl split_score.json
//! humaneval/
//! ```
//!
//! A stage is skipped when its artifact already exists, so a rerun picks up
//! where the previous one stopped. `exchange.json` is written last among the
//! render artifacts and marks a split as rendered.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_task, SkipRecord};
use crate::error::{Error, Result};
use crate::exchange::{
    align_responses, ExchangeCounts, ExchangeManifest, ExchangeRequest, ExchangeResponse,
};
use crate::humaneval::{
    emit_batches, ingest_annotations, plausibility_report, select_eval_items, AnnotationItem,
    Ingested, PlausibilityReport, Selection, SplitPredictions, BATCH_SIZE,
};
use crate::instance::{Corpus, Instance};
use crate::io::{read_json, read_jsonl, to_jsonl, write_atomic, write_json, write_jsonl};
use crate::metrics::{
    aggregate_benchmark, aggregate_split, score_split, BenchmarkReport, CommandTransport,
    ExternalScorer, InstanceScore, LexicalF1Scorer, SimilarityScorer, SplitScore,
};
use crate::oracle::{oracle_responses, OracleKind};
use crate::parse::{parse_output, LabelVocabulary, Prediction};
use crate::prompt::{
    render_split, PackingProfile, PromptFamily, PromptVariant, QuestionForm, RenderedExample,
};
use crate::split::{corpus_digest, sample_splits, split_digest, DigestManifest, Split};
use crate::task::{TaskId, TaskSpec, DEV_SIZE, INCONTEXT_DEV_SIZE, N_SPLITS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub family: PromptFamily,
    #[serde(default)]
    pub question: QuestionForm,
    #[serde(default)]
    pub tags: bool,
    #[serde(default)]
    pub choices: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerConfig {
    #[default]
    Lexical,
    /// A command speaking the scorer protocol on stdin/stdout.
    External { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Responses are written into each split directory by an outside process.
    #[default]
    Exchange,
    EchoGold,
    ConstantLabel {
        label: String,
    },
    UniformRandom {
        seed: u64,
    },
}

impl ModelConfig {
    pub fn oracle(&self) -> Option<OracleKind> {
        match self {
            ModelConfig::Exchange => None,
            ModelConfig::EchoGold => Some(OracleKind::EchoGold),
            ModelConfig::ConstantLabel { label } => Some(OracleKind::ConstantLabel {
                label: label.clone(),
            }),
            ModelConfig::UniformRandom { seed } => Some(OracleKind::UniformRandom { seed: *seed }),
        }
    }
}

fn default_n_splits() -> usize {
    N_SPLITS
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskId,
    /// Normalized instances (JSONL), as written by `build_data`.
    pub data: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_n_splits")]
    pub n_splits: usize,
    /// Defaults to 350, or 18 for the in-context family.
    #[serde(default)]
    pub dev_size: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Defaults to the task's recommended variant.
    #[serde(default)]
    pub variant: Option<VariantConfig>,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub packing: PackingProfile,
}

impl RunConfig {
    pub fn new(task: TaskId, data: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            task,
            data: data.into(),
            output_dir: output_dir.into(),
            n_splits: N_SPLITS,
            dev_size: None,
            master_seed: 0,
            parallelism: default_parallelism(),
            variant: None,
            scorer: ScorerConfig::default(),
            model: ModelConfig::default(),
            packing: PackingProfile::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn variant(&self) -> Result<PromptVariant> {
        let v = match &self.variant {
            None => PromptVariant::recommended(self.task),
            Some(c) => PromptVariant::new(self.task, c.family)
                .question(c.question)
                .tags(c.tags)
                .choices(c.choices),
        };
        v.validate()?;
        Ok(v)
    }

    /// The in-context family always evaluates on 18 dev instances.
    pub fn effective_dev_size(&self) -> Result<usize> {
        let incontext = self.variant()?.family == PromptFamily::Incontext;
        Ok(if incontext {
            INCONTEXT_DEV_SIZE
        } else {
            self.dev_size.unwrap_or(DEV_SIZE)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.variant()?;
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be positive".into()));
        }
        if self.effective_dev_size()? == 0 {
            return Err(Error::Config("dev_size must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be positive".into()));
        }
        if let ScorerConfig::External { command } = &self.scorer {
            if command.is_empty() {
                return Err(Error::Config("external scorer command is empty".into()));
            }
        }
        if self.packing.token_budget == 0
            || self.packing.chars_per_token.is_nan()
            || self.packing.chars_per_token <= 0.0
        {
            return Err(Error::Config("packing budget must be positive".into()));
        }
        Ok(())
    }

    pub fn scorer_identity(&self) -> String {
        self.build_scorer().identity()
    }

    fn build_scorer(&self) -> Box<dyn SimilarityScorer> {
        match &self.scorer {
            ScorerConfig::Lexical => Box::new(LexicalF1Scorer),
            ScorerConfig::External { command } => Box::new(ExternalScorer::new(
                CommandTransport::new(command[0].clone(), command[1..].to_vec()),
            )),
        }
    }
}

/// The settings that determine artifact contents. Stored as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub task: TaskId,
    pub corpus_digest: String,
    pub n_splits: usize,
    pub dev_size: usize,
    pub master_seed: u64,
    pub variant: PromptVariant,
    pub scorer: ScorerConfig,
    pub model: ModelConfig,
    pub packing: PackingProfile,
}

impl ResolvedConfig {
    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable config");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

/// How far [`run_until`] takes a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Split,
    Render,
    /// Built-in oracle responses; a no-op for exchange models.
    Respond,
    Score,
    Aggregate,
}

pub const SPLITS_FILE: &str = "splits.jsonl";
pub const DIGESTS_FILE: &str = "digests.json";
pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_TABLE_FILE: &str = "report.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const TRAIN_FILE: &str = "train.jsonl";
pub const REQUESTS_FILE: &str = "requests.jsonl";
pub const GOLD_FILE: &str = "gold.jsonl";
pub const EXCHANGE_FILE: &str = "exchange.json";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const SPLIT_SCORE_FILE: &str = "split_score.json";

const SPLIT_ARTIFACTS: [&str; 8] = [
    TRAIN_FILE,
    REQUESTS_FILE,
    GOLD_FILE,
    EXCHANGE_FILE,
    RESPONSES_FILE,
    PREDICTIONS_FILE,
    SCORES_FILE,
    SPLIT_SCORE_FILE,
];

/// Relative directory of a split: `splits/NN-<first 12 hex of its digest>`.
pub fn split_dir_name(split: &Split) -> String {
    format!(
        "splits/{:02}-{}",
        split.split_index,
        &split_digest(split)[..12]
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoCountSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub per_split: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub split_index: usize,
    pub digest: String,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: ResolvedConfig,
    pub scorer: String,
    pub splits: Vec<SplitEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo_counts: Option<DemoCountSummary>,
    /// Every artifact present, relative to the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: Option<BenchmarkReport>,
}

/// Write only when the content differs, so completed reruns touch nothing.
fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<()> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => Ok(()),
        _ => write_atomic(path, bytes),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable record");
    text.push('\n');
    text.into_bytes()
}

/// Load and validate a normalized instance file.
pub fn load_instances(path: &Path, task: TaskId) -> Result<Vec<Instance>> {
    let instances: Vec<Instance> = read_jsonl(path)?;
    let spec = TaskSpec::for_task(task);
    for inst in &instances {
        if inst.task != task {
            return Err(Error::InvalidInstance {
                id: inst.id.clone(),
                reason: format!("is a {} instance, expected {task}", inst.task),
            });
        }
        inst.validate(&spec)?;
    }
    Ok(instances)
}

/// Normalize a source dataset into `out` (JSONL) and log skipped rows beside it.
pub fn build_data(task: TaskId, source: &Path, out: &Path) -> Result<(usize, Vec<SkipRecord>)> {
    let loaded = load_task(task, source)?;
    write_jsonl(out, &loaded.instances)?;
    let log = out.with_extension("skipped.jsonl");
    write_jsonl(&log, &loaded.skipped)?;
    Ok((loaded.instances.len(), loaded.skipped))
}

struct Context {
    cfg: RunConfig,
    resolved: ResolvedConfig,
    run_id: String,
    spec: TaskSpec,
    variant: PromptVariant,
    corpus: Corpus,
    splits: Vec<Split>,
}

impl Context {
    fn out(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }
}

fn prepare(cfg: &RunConfig) -> Result<Context> {
    cfg.validate()?;
    let variant = cfg.variant()?;
    let dev_size = cfg.effective_dev_size()?;
    if !cfg.data.exists() {
        return Err(Error::MissingArtifact(format!(
            "normalized data `{}` not found (run build-data first)",
            cfg.data.display()
        )));
    }
    let instances = load_instances(&cfg.data, cfg.task)?;
    let spec = TaskSpec::for_task(cfg.task);
    let resolved = ResolvedConfig {
        task: cfg.task,
        corpus_digest: corpus_digest(&instances),
        n_splits: cfg.n_splits,
        dev_size,
        master_seed: cfg.master_seed,
        variant,
        scorer: cfg.scorer.clone(),
        model: cfg.model.clone(),
        packing: cfg.packing,
    };

    let config_path = cfg.output_dir.join(CONFIG_FILE);
    if config_path.exists() {
        let stored: ResolvedConfig = read_json(&config_path)?;
        if stored != resolved {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration (run {}); use a new output_dir",
                cfg.output_dir.display(),
                stored.run_id()
            )));
        }
    } else {
        write_json(&config_path, &resolved)?;
    }

    let splits = sample_splits(&instances, &spec, cfg.n_splits, dev_size, cfg.master_seed)?;
    let digests = DigestManifest::new(cfg.task, cfg.master_seed, dev_size, &instances, &splits);
    write_if_changed(
        &cfg.output_dir.join(SPLITS_FILE),
        to_jsonl(&splits).as_bytes(),
    )?;
    write_if_changed(&cfg.output_dir.join(DIGESTS_FILE), &json_bytes(&digests))?;

    Ok(Context {
        run_id: resolved.run_id(),
        cfg: cfg.clone(),
        resolved,
        spec,
        variant,
        corpus: Corpus::new(instances)?,
        splits,
    })
}

fn render_stage(ctx: &Context, split: &Split, dir: &Path) -> Result<()> {
    if dir.join(EXCHANGE_FILE).exists() {
        return Ok(());
    }
    let rendered = render_split(split, &ctx.corpus, &ctx.variant, &ctx.cfg.packing)?;
    let requests: Vec<ExchangeRequest> = rendered
        .dev
        .iter()
        .map(|ex| ExchangeRequest {
            id: ex.instance_id.clone(),
            input: ex.input.clone(),
        })
        .collect();
    write_jsonl(&dir.join(TRAIN_FILE), &rendered.train)?;
    write_jsonl(&dir.join(REQUESTS_FILE), &requests)?;
    write_jsonl(&dir.join(GOLD_FILE), &rendered.dev)?;
    let manifest = ExchangeManifest {
        run_id: ctx.run_id.clone(),
        split_index: split.split_index,
        variant: ctx.variant.slug(),
        counts: ExchangeCounts {
            train: rendered.train.len(),
            dev: rendered.dev.len(),
        },
        demo_counts: rendered.demo_counts,
    };
    write_json(&dir.join(EXCHANGE_FILE), &manifest)
}

fn respond_stage(ctx: &Context, split: &Split, dir: &Path) -> Result<()> {
    let Some(kind) = ctx.cfg.model.oracle() else {
        return Ok(());
    };
    let path = dir.join(RESPONSES_FILE);
    if path.exists() {
        return Ok(());
    }
    let gold: Vec<RenderedExample> = read_jsonl(&dir.join(GOLD_FILE))?;
    let responses = oracle_responses(&kind, split.split_index, &gold, &ctx.corpus, &ctx.variant)?;
    write_jsonl(&path, &responses)
}

fn score_stage(
    ctx: &Context,
    scorer: &dyn SimilarityScorer,
    split: &Split,
    dir: &Path,
) -> Result<()> {
    let label = format!("split {:02} ({})", split.split_index, dir.display());
    let pred_path = dir.join(PREDICTIONS_FILE);
    if !pred_path.exists() {
        let requests: Vec<ExchangeRequest> = read_jsonl(&dir.join(REQUESTS_FILE))?;
        let resp_path = dir.join(RESPONSES_FILE);
        if !resp_path.exists() {
            let ids: Vec<String> = requests.iter().map(|r| r.id.clone()).collect();
            return Err(Error::MissingArtifact(format!(
                "{label}: {RESPONSES_FILE} not found; {} requests await responses (first ids: {})",
                ids.len(),
                ids.iter().take(5).cloned().collect::<Vec<_>>().join(", ")
            )));
        }
        let responses: Vec<ExchangeResponse> = read_jsonl(&resp_path)?;
        let responses = align_responses(&label, &requests, responses)?;
        let mut predictions = Vec::with_capacity(responses.len());
        for r in &responses {
            let inst = ctx.corpus.get(&r.id)?;
            let vocab = LabelVocabulary::for_instance(&ctx.spec, &ctx.variant, inst);
            predictions.push(parse_output(&r.id, &r.output, &ctx.variant, &vocab));
        }
        write_jsonl(&pred_path, &predictions)?;
    }

    let scores_path = dir.join(SCORES_FILE);
    if !scores_path.exists() {
        let predictions: Vec<Prediction> = read_jsonl(&pred_path)?;
        let golds: Vec<&Instance> = predictions
            .iter()
            .map(|p| ctx.corpus.get(&p.instance_id))
            .collect::<Result<_>>()?;
        let scores = score_split(&predictions, &golds, scorer)?;
        write_jsonl(&scores_path, &scores)?;
    }

    let split_score_path = dir.join(SPLIT_SCORE_FILE);
    if !split_score_path.exists() {
        let scores: Vec<InstanceScore> = read_jsonl(&scores_path)?;
        let s = aggregate_split(split.split_index, &scores, split.dev_ids.len())?;
        write_json(&split_score_path, &s)?;
    }
    Ok(())
}

/// Merge per-split failures, keeping missing-artifact errors distinguishable.
fn merge_errors(errors: Vec<Error>) -> Result<()> {
    if errors.is_empty() {
        return Ok(());
    }
    if errors.len() == 1 {
        return Err(errors.into_iter().next().expect("one error"));
    }
    let all_missing = errors.iter().all(Error::is_missing_artifact);
    let msg = errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n  ");
    Err(if all_missing {
        Error::MissingArtifact(format!("{} splits incomplete:\n  {msg}", errors.len()))
    } else {
        Error::Config(format!("{} splits failed:\n  {msg}", errors.len()))
    })
}

fn build_manifest(ctx: &Context) -> Result<RunManifest> {
    let mut artifacts = Vec::new();
    for f in [
        CONFIG_FILE,
        SPLITS_FILE,
        DIGESTS_FILE,
        REPORT_FILE,
        REPORT_TABLE_FILE,
    ] {
        if ctx.out(f).exists() {
            artifacts.push(f.to_string());
        }
    }
    let mut entries = Vec::new();
    let mut per_split = Vec::new();
    for split in &ctx.splits {
        let dir = split_dir_name(split);
        for f in SPLIT_ARTIFACTS {
            let rel = format!("{dir}/{f}");
            if ctx.out(&rel).exists() {
                artifacts.push(rel);
            }
        }
        let ex = ctx.out(&format!("{dir}/{EXCHANGE_FILE}"));
        if ctx.variant.family == PromptFamily::Incontext && ex.exists() {
            let m: ExchangeManifest = read_json(&ex)?;
            per_split.push(m.demo_counts);
        }
        entries.push(SplitEntry {
            split_index: split.split_index,
            digest: split_digest(split),
            dir,
        });
    }
    let flat: Vec<usize> = per_split.iter().flatten().copied().collect();
    let demo_counts = (!flat.is_empty()).then(|| DemoCountSummary {
        min: *flat.iter().min().expect("non-empty"),
        max: *flat.iter().max().expect("non-empty"),
        mean: flat.iter().sum::<usize>() as f64 / flat.len() as f64,
        per_split,
    });
    Ok(RunManifest {
        run_id: ctx.run_id.clone(),
        config: ctx.resolved.clone(),
        scorer: ctx.cfg.scorer_identity(),
        splits: entries,
        demo_counts,
        artifacts,
    })
}

/// Run every stage.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    run_until(cfg, Stage::Aggregate)
}

/// Run stages up to and including `last`, skipping work whose artifacts exist.
pub fn run_until(cfg: &RunConfig, last: Stage) -> Result<RunOutcome> {
    let ctx = prepare(cfg)?;
    let scorer = cfg.build_scorer();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let result = if last >= Stage::Render {
        let errors: Vec<Error> = pool.install(|| {
            ctx.splits
                .par_iter()
                .filter_map(|split| {
                    let dir = ctx.out(&split_dir_name(split));
                    let run = || -> Result<()> {
                        render_stage(&ctx, split, &dir)?;
                        if last >= Stage::Respond {
                            respond_stage(&ctx, split, &dir)?;
                        }
                        if last >= Stage::Score {
                            score_stage(&ctx, scorer.as_ref(), split, &dir)?;
                        }
                        Ok(())
                    };
                    run().err()
                })
                .collect()
        });
        let mut errors = errors;
        errors.sort_by_key(ToString::to_string);
        merge_errors(errors)
    } else {
        Ok(())
    };

    let report = match &result {
        Ok(()) if last >= Stage::Aggregate => Some(aggregate_stage(&ctx)?),
        _ => None,
    };
    let manifest = build_manifest(&ctx)?;
    write_if_changed(&ctx.out(MANIFEST_FILE), &json_bytes(&manifest))?;
    result?;
    Ok(RunOutcome { manifest, report })
}

fn aggregate_stage(ctx: &Context) -> Result<BenchmarkReport> {
    let mut scores = Vec::with_capacity(ctx.splits.len());
    for split in &ctx.splits {
        let path = ctx.out(&format!("{}/{SPLIT_SCORE_FILE}", split_dir_name(split)));
        let s: SplitScore = read_json(&path)?;
        scores.push(s);
    }
    let report = aggregate_benchmark(
        ctx.cfg.task,
        &ctx.variant.slug(),
        &ctx.cfg.scorer_identity(),
        &scores,
    )?;
    write_if_changed(&ctx.out(REPORT_FILE), &json_bytes(&report))?;
    write_if_changed(&ctx.out(REPORT_TABLE_FILE), report.to_table().as_bytes())?;
    Ok(report)
}

/// Predictions of every split, in split order.
pub fn load_predictions(cfg: &RunConfig) -> Result<Vec<SplitPredictions>> {
    let splits: Vec<Split> = read_jsonl(&cfg.output_dir.join(SPLITS_FILE))?;
    let mut out = Vec::with_capacity(splits.len());
    let mut missing = Vec::new();
    for split in &splits {
        let path = cfg
            .output_dir
            .join(split_dir_name(split))
            .join(PREDICTIONS_FILE);
        if !path.exists() {
            missing.push(format!("{:02}", split.split_index));
            continue;
        }
        let predictions: Vec<Prediction> = read_jsonl(&path)?;
        let order: Vec<&str> = predictions.iter().map(|p| p.instance_id.as_str()).collect();
        let dev: Vec<&str> = split.dev_ids.iter().map(String::as_str).collect();
        if order != dev {
            return Err(Error::Config(format!(
                "{}: predictions are not in dev order",
                path.display()
            )));
        }
        out.push(SplitPredictions {
            split_index: split.split_index,
            predictions,
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "predictions missing for splits {}",
            missing.join(", ")
        )));
    }
    Ok(out)
}

pub const HUMANEVAL_DIR: &str = "humaneval";
pub const ITEMS_FILE: &str = "items.jsonl";
pub const SELECTION_FILE: &str = "selection.json";
pub const BATCH_DIR: &str = "batches";
pub const PLAUSIBILITY_FILE: &str = "plausibility.json";
pub const REJECTED_FILE: &str = "rejected.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SelectionSummary {
    seed: u64,
    n_items: usize,
    imbalances: Vec<crate::humaneval::Imbalance>,
}

pub fn humaneval_select(cfg: &RunConfig, seed: u64) -> Result<Selection> {
    let instances = load_instances(&cfg.data, cfg.task)?;
    let corpus = Corpus::new(instances)?;
    let predictions = load_predictions(cfg)?;
    let selection = select_eval_items(&predictions, &corpus, &TaskSpec::for_task(cfg.task), seed)?;
    let dir = cfg.output_dir.join(HUMANEVAL_DIR);
    write_jsonl(&dir.join(ITEMS_FILE), &selection.items)?;
    write_json(
        &dir.join(SELECTION_FILE),
        &SelectionSummary {
            seed,
            n_items: selection.items.len(),
            imbalances: selection.imbalances.clone(),
        },
    )?;
    Ok(selection)
}

fn load_items(cfg: &RunConfig) -> Result<Vec<AnnotationItem>> {
    let path = cfg.output_dir.join(HUMANEVAL_DIR).join(ITEMS_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact(format!(
            "{} not found (run humaneval-select first)",
            path.display()
        )));
    }
    read_jsonl(&path)
}

pub fn humaneval_emit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let items = load_items(cfg)?;
    emit_batches(
        &items,
        BATCH_SIZE,
        &cfg.output_dir.join(HUMANEVAL_DIR).join(BATCH_DIR),
    )
}

pub fn humaneval_report(
    cfg: &RunConfig,
    results: &[PathBuf],
) -> Result<(PlausibilityReport, Ingested)> {
    let items = load_items(cfg)?;
    let mut seen = HashSet::new();
    for p in results {
        if !seen.insert(p) {
            return Err(Error::Annotation(format!("{} given twice", p.display())));
        }
        if !p.exists() {
            return Err(Error::MissingArtifact(format!("{} not found", p.display())));
        }
    }
    let ingested = ingest_annotations(results, &items)?;
    let report = plausibility_report(&ingested.judgments, &items, &TaskSpec::for_task(cfg.task))?;
    let dir = cfg.output_dir.join(HUMANEVAL_DIR);
    write_json(&dir.join(PLAUSIBILITY_FILE), &report)?;
    write_jsonl(&dir.join(REJECTED_FILE), &ingested.rejected)?;
    Ok((report, ingested))
}
