//! The four benchmark tasks and their fixed protocol constants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Training instances per split, for every task.
pub const TRAIN_SIZE: usize = 48;
/// Dev instances per split for finetuned models.
pub const DEV_SIZE: usize = 350;
/// Dev instances per split under the in-context (completion API) budget profile.
pub const INCONTEXT_DEV_SIZE: usize = 18;
/// Number of train/dev splits.
pub const N_SPLITS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    Esnli,
    Ecqa,
    Comve,
    Sbic,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [TaskId::Esnli, TaskId::Ecqa, TaskId::Comve, TaskId::Sbic];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Esnli => "esnli",
            TaskId::Ecqa => "ecqa",
            TaskId::Comve => "comve",
            TaskId::Sbic => "sbic",
        }
    }

    /// Names of the input fields every instance of this task carries, in display order.
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            TaskId::Esnli => &["premise", "hypothesis"],
            TaskId::Ecqa => &[
                "question", "choice1", "choice2", "choice3", "choice4", "choice5",
            ],
            TaskId::Comve => &["sentence1", "sentence2"],
            TaskId::Sbic => &["post"],
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "esnli" | "e-snli" => Ok(TaskId::Esnli),
            "ecqa" => Ok(TaskId::Ecqa),
            "comve" => Ok(TaskId::Comve),
            "sbic" => Ok(TaskId::Sbic),
            _ => Err(Error::UnknownTask(s.to_string())),
        }
    }
}

/// Static description of one task: its label inventory and training-set shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskSpec {
    pub task_id: TaskId,
    /// Canonical labels in fixed order. Empty for ECQA, whose labels are the
    /// per-instance answer choices.
    pub label_set: Vec<String>,
    pub shots_per_label: Option<usize>,
    pub train_size: usize,
    pub is_classification: bool,
}

impl TaskSpec {
    pub fn for_task(task_id: TaskId) -> Self {
        let labels: &[&str] = match task_id {
            TaskId::Esnli => &["entailment", "neutral", "contradiction"],
            TaskId::Ecqa => &[],
            TaskId::Comve => &["choice1", "choice2"],
            TaskId::Sbic => &["offensive", "not offensive"],
        };
        let shots_per_label = match task_id {
            TaskId::Esnli => Some(16),
            TaskId::Ecqa => None,
            TaskId::Comve | TaskId::Sbic => Some(24),
        };
        TaskSpec {
            task_id,
            label_set: labels.iter().map(|s| s.to_string()).collect(),
            shots_per_label,
            train_size: TRAIN_SIZE,
            is_classification: task_id != TaskId::Ecqa,
        }
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.label_set.iter().any(|l| l == label)
    }
}
