use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use explainbench_core::metrics::{ScorePair, ScoreRecord, ScorerHandshake};
use explainbench_core::pipeline::{
    build_data, humaneval_emit, humaneval_report, humaneval_select, run_pipeline, run_until,
    ModelConfig, RunConfig, RunOutcome, ScorerConfig, Stage, VariantConfig,
};
use explainbench_core::{Error, PromptFamily, QuestionForm, TaskId};

#[derive(Parser)]
#[command(
    name = "explainbench",
    version,
    about = "Few-shot self-rationalization benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a source dataset file into instance JSONL.
    BuildData {
        #[arg(long)]
        task: TaskId,
        /// Source file in the dataset's original format.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the train/dev splits.
    Split(RunArgs),
    /// Render model inputs and exchange request files.
    Render(RunArgs),
    /// Write responses from a built-in oracle model.
    Oracle(RunArgs),
    /// Parse responses and score every split.
    Score(RunArgs),
    /// Aggregate split scores into the benchmark report.
    Aggregate(RunArgs),
    /// Run every stage, resuming from existing artifacts.
    Run(RunArgs),
    /// Select items for human plausibility evaluation.
    HumanevalSelect {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write annotation batch files for the selected items.
    HumanevalEmit(RunArgs),
    /// Ingest rater result files and write the plausibility report.
    HumanevalReport {
        #[command(flatten)]
        run: RunArgs,
        /// Rater result CSV files.
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// Reference scorer endpoint: reads pairs on stdin, scores each 1.0.
    #[command(hide = true)]
    EchoScorer,
}

/// Run configuration: a TOML file, overridden key by key by flags.
#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<TaskId>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long)]
    dev_size: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Prompt family (qa_simple, squad_t5, infilling_basic, infilling_natural, approx_t5, unifew, incontext).
    #[arg(long, value_parser = PromptFamily::parse)]
    family: Option<PromptFamily>,
    #[arg(long, value_parser = QuestionForm::parse)]
    question: Option<QuestionForm>,
    #[arg(long)]
    tags: Option<bool>,
    #[arg(long)]
    choices: Option<bool>,
    /// `lexical`, or `external` together with --scorer-command.
    #[arg(long)]
    scorer: Option<String>,
    /// External scorer program and arguments.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    scorer_command: Option<Vec<String>>,
    /// `exchange`, `echo_gold`, `constant_label` or `uniform_random`.
    #[arg(long)]
    model: Option<String>,
    /// Label for the constant_label model.
    #[arg(long)]
    model_label: Option<String>,
    /// Seed for the uniform_random model.
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    token_budget: Option<usize>,
    #[arg(long)]
    chars_per_token: Option<f64>,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let (Some(task), Some(data), Some(out)) = (self.task, &self.data, &self.output_dir)
                else {
                    return Err(config_error(
                        "without --config, --task, --data and --output-dir are required",
                    ));
                };
                RunConfig::new(task, data, out)
            }
        };
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(d) = &self.data {
            cfg.data = d.clone();
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        if let Some(n) = self.n_splits {
            cfg.n_splits = n;
        }
        if let Some(n) = self.dev_size {
            cfg.dev_size = Some(n);
        }
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = p;
        }
        if self.family.is_some()
            || self.question.is_some()
            || self.tags.is_some()
            || self.choices.is_some()
        {
            let base = cfg.variant.clone().unwrap_or_else(|| {
                let v = explainbench_core::PromptVariant::recommended(cfg.task);
                VariantConfig {
                    family: v.family,
                    question: v.question_form,
                    tags: v.with_tags,
                    choices: v.with_choices,
                }
            });
            cfg.variant = Some(VariantConfig {
                family: self.family.unwrap_or(base.family),
                question: self.question.unwrap_or(base.question),
                tags: self.tags.unwrap_or(base.tags),
                choices: self.choices.unwrap_or(base.choices),
            });
        }
        match (self.scorer.as_deref(), &self.scorer_command) {
            (None, None) => {}
            (Some("lexical"), None) => cfg.scorer = ScorerConfig::Lexical,
            (Some("external") | None, Some(command)) => {
                cfg.scorer = ScorerConfig::External {
                    command: command.clone(),
                }
            }
            (Some("external"), None) => {
                return Err(config_error("--scorer external needs --scorer-command"))
            }
            (Some(other), _) => return Err(config_error(format!("unknown scorer `{other}`"))),
        }
        if let Some(kind) = &self.model {
            cfg.model = match kind.as_str() {
                "exchange" => ModelConfig::Exchange,
                "echo_gold" => ModelConfig::EchoGold,
                "constant_label" => ModelConfig::ConstantLabel {
                    label: self.model_label.clone().ok_or_else(|| {
                        config_error("--model constant_label needs --model-label")
                    })?,
                },
                "uniform_random" => ModelConfig::UniformRandom {
                    seed: self.model_seed.unwrap_or(0),
                },
                other => return Err(config_error(format!("unknown model `{other}`"))),
            };
        }
        if let Some(t) = self.token_budget {
            cfg.packing.token_budget = t;
        }
        if let Some(c) = self.chars_per_token {
            cfg.packing.chars_per_token = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn summarize(outcome: &RunOutcome) {
    let m = &outcome.manifest;
    println!(
        "run {} ({} splits) in {}",
        m.run_id,
        m.splits.len(),
        m.config.task
    );
    if let Some(d) = &m.demo_counts {
        println!(
            "demonstrations per prompt: {}..{} (mean {:.1})",
            d.min, d.max, d.mean
        );
    }
    if let Some(r) = &outcome.report {
        print!("{}", r.to_table());
    }
}

fn stage(args: &RunArgs, last: Stage) -> anyhow::Result<()> {
    let cfg = args.resolve()?;
    if last == Stage::Respond && cfg.model.oracle().is_none() {
        return Err(config_error(
            "the oracle verb needs an oracle model (echo_gold, constant_label or uniform_random)",
        ));
    }
    let outcome = if last == Stage::Aggregate {
        run_pipeline(&cfg)?
    } else {
        run_until(&cfg, last)?
    };
    summarize(&outcome);
    Ok(())
}

fn echo_scorer() -> anyhow::Result<()> {
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let handshake = ScorerHandshake {
        scorer: "echo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    writeln!(out, "{}", serde_json::to_string(&handshake)?)?;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: ScorePair =
            serde_json::from_str(&line).with_context(|| format!("bad pair `{line}`"))?;
        let rec = ScoreRecord {
            id: pair.id,
            score: 1.0,
        };
        writeln!(out, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::BuildData { task, source, out } => {
            let (kept, skipped) = build_data(task, &source, &out)?;
            println!(
                "{kept} instances written to {}, {} rows skipped",
                out.display(),
                skipped.len()
            );
        }
        Command::Split(a) => stage(&a, Stage::Split)?,
        Command::Render(a) => stage(&a, Stage::Render)?,
        Command::Oracle(a) => stage(&a, Stage::Respond)?,
        Command::Score(a) => stage(&a, Stage::Score)?,
        Command::Aggregate(a) | Command::Run(a) => stage(&a, Stage::Aggregate)?,
        Command::HumanevalSelect { run, seed } => {
            let sel = humaneval_select(&run.resolve()?, seed)?;
            println!("{} items selected", sel.items.len());
            for i in &sel.imbalances {
                println!("imbalance: {}", serde_json::to_string(i)?);
            }
        }
        Command::HumanevalEmit(a) => {
            let files = humaneval_emit(&a.resolve()?)?;
            println!("{} batch files written", files.len());
        }
        Command::HumanevalReport { run, results } => {
            let (report, ingested) = humaneval_report(&run.resolve()?, &results)?;
            println!("{} rejected responses", ingested.rejected.len());
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::EchoScorer => echo_scorer()?,
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are validation errors; clap's own code 2 means a missing artifact here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let missing = e
                .downcast_ref::<Error>()
                .is_some_and(Error::is_missing_artifact);
            if missing {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
