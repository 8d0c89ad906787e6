//! Few-shot self-rationalization benchmark harness.
//!
//! Loads four explanation datasets into a common instance schema, samples
//! seeded few-shot splits, renders prompts for several model families, parses
//! generations back into labels and explanations, and scores them.

pub mod dataset;
pub mod error;
pub mod exchange;
pub mod humaneval;
pub mod instance;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod prompt;
pub mod split;
pub mod synthetic;
pub mod task;
pub mod text;

pub use error::{Error, Result};
pub use instance::{Corpus, Instance};
pub use metrics::{
    aggregate_benchmark, aggregate_split, lexical_f1, score_instance, BenchmarkReport,
    InstanceScore, LexicalF1Scorer, SimilarityScorer, SplitScore,
};
pub use parse::{canonicalize_label, parse_output, LabelVocabulary, ParseFlag, Prediction};
pub use pipeline::{run_pipeline, RunConfig};
pub use prompt::{PromptFamily, PromptVariant, QuestionForm};
pub use split::{sample_splits, Split};
pub use task::{TaskId, TaskSpec};
