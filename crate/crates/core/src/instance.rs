use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{TaskId, TaskSpec};

/// One normalized task example.
///
/// Serialized as a JSON line with keys in the order
/// `id, task, fields, label, explanation, source_row`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub task: TaskId,
    pub fields: IndexMap<String, String>,
    pub label: String,
    pub explanation: String,
    /// Zero-based data row in the source file the instance was built from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_row: Option<usize>,
}

impl Instance {
    pub fn field(&self, name: &str) -> Result<&str> {
        match self.fields.get(name) {
            Some(v) if !v.trim().is_empty() => Ok(v),
            _ => Err(Error::MissingField {
                id: self.id.clone(),
                field: name.to_string(),
            }),
        }
    }

    /// The five answer choices of an ECQA instance, in order. Empty for other tasks.
    pub fn choices(&self) -> Vec<&str> {
        if self.task != TaskId::Ecqa {
            return Vec::new();
        }
        (1..=5)
            .filter_map(|i| self.fields.get(&format!("choice{i}")).map(String::as_str))
            .collect()
    }

    /// Labels this instance may legally carry.
    pub fn allowed_labels<'a>(&'a self, spec: &'a TaskSpec) -> Vec<&'a str> {
        if spec.is_classification {
            spec.label_set.iter().map(String::as_str).collect()
        } else {
            self.choices()
        }
    }

    pub fn validate(&self, spec: &TaskSpec) -> Result<()> {
        let invalid = |reason: String| Error::InvalidInstance {
            id: self.id.clone(),
            reason,
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        if self.task != spec.task_id {
            return Err(invalid(format!(
                "task {} does not match {}",
                self.task, spec.task_id
            )));
        }
        for name in self.task.field_names() {
            self.field(name)?;
        }
        if self.explanation.trim().is_empty() {
            return Err(invalid("empty explanation".into()));
        }
        if self
            .explanation
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_lowercase())
        {
            return Err(invalid(
                "explanation must not start with a lowercase letter".into(),
            ));
        }
        if !self.allowed_labels(spec).contains(&self.label.as_str()) {
            return Err(invalid(format!("label `{}` is not allowed", self.label)));
        }
        Ok(())
    }
}

/// Lookup of instances by id, preserving corpus order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    instances: IndexMap<String, Instance>,
}

impl Corpus {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let mut map = IndexMap::with_capacity(instances.len());
        for inst in instances {
            if map.contains_key(&inst.id) {
                return Err(Error::InvalidInstance {
                    id: inst.id,
                    reason: "duplicate id in corpus".into(),
                });
            }
            map.insert(inst.id.clone(), inst);
        }
        Ok(Corpus { instances: map })
    }

    pub fn get(&self, id: &str) -> Result<&Instance> {
        self.instances
            .get(id)
            .ok_or_else(|| Error::InvalidInstance {
                id: id.to_string(),
                reason: "id not present in corpus".into(),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}
