//! Built-in reference models that answer exchange requests without inference.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exchange::ExchangeResponse;
use crate::instance::{Corpus, Instance};
use crate::prompt::{format_target, surface_for, PromptVariant, RenderedExample};
use crate::task::TaskSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    /// Emits the gold target of every request.
    EchoGold,
    /// Always answers `label` with an empty explanation.
    ConstantLabel { label: String },
    /// Answers a label drawn uniformly from the instance's label set.
    UniformRandom { seed: u64 },
}

fn oracle_seed(seed: u64, split_index: usize) -> u64 {
    let digest = Sha256::digest(format!("oracle:{seed}:{split_index}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

fn label_only(variant: &PromptVariant, inst: &Instance, label: &str) -> Result<String> {
    Ok(format_target(
        variant,
        &surface_for(variant, inst, label)?,
        "",
    ))
}

/// Responses for the dev side of one rendered split, in request order.
pub fn oracle_responses(
    kind: &OracleKind,
    split_index: usize,
    gold: &[RenderedExample],
    corpus: &Corpus,
    variant: &PromptVariant,
) -> Result<Vec<ExchangeResponse>> {
    let spec = TaskSpec::for_task(variant.task);
    let mut rng = match kind {
        OracleKind::UniformRandom { seed } => {
            Some(ChaCha8Rng::seed_from_u64(oracle_seed(*seed, split_index)))
        }
        _ => None,
    };
    if let OracleKind::ConstantLabel { label } = kind {
        if spec.is_classification && !spec.has_label(label) {
            return Err(Error::Config(format!(
                "constant label `{label}` is not a {} label",
                variant.task
            )));
        }
    }
    gold.iter()
        .map(|ex| {
            let output = match kind {
                OracleKind::EchoGold => ex.target.clone(),
                OracleKind::ConstantLabel { label } => {
                    let inst = corpus.get(&ex.instance_id)?;
                    if spec.is_classification {
                        label_only(variant, inst, label)?
                    } else {
                        // Open-label tasks: the label is emitted verbatim and
                        // is only correct where it matches the instance's answer.
                        format_target(variant, label, "")
                    }
                }
                OracleKind::UniformRandom { .. } => {
                    let inst = corpus.get(&ex.instance_id)?;
                    let labels = inst.allowed_labels(&spec);
                    let rng = rng.as_mut().expect("seeded above");
                    let label = labels.choose(rng).ok_or_else(|| Error::InvalidInstance {
                        id: inst.id.clone(),
                        reason: "no labels to draw from".into(),
                    })?;
                    label_only(variant, inst, label)?
                }
            };
            Ok(ExchangeResponse {
                id: ex.instance_id.clone(),
                output,
            })
        })
        .collect()
}
