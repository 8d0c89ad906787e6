//! Seeded train/dev splits.
//!
//! Each split draws from its own ChaCha8 stream seeded with the first eight
//! bytes (little endian) of `SHA-256("{master_seed}:{task}:{split_index}")`.
//! Within a split:
//!
//! 1. classification tasks: for each label in label-set order, take the
//!    label's instances in corpus order and partially shuffle out
//!    `shots_per_label` of them; ECQA takes 48 from the whole corpus the same way;
//! 2. the training list is shuffled;
//! 3. the remaining instances (corpus order) are partially shuffled to draw
//!    the dev set, whose sampled order is kept verbatim.
//!
//! Splits are independent of each other, so train and dev sets may overlap
//! across splits.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::task::{TaskId, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub split_index: usize,
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub dev_ids: Vec<String>,
}

/// Per-split seed derived from the master seed.
pub fn split_seed(master_seed: u64, task: TaskId, split_index: usize) -> u64 {
    let digest = Sha256::digest(format!("{master_seed}:{task}:{split_index}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn sample_splits(
    instances: &[Instance],
    spec: &TaskSpec,
    n_splits: usize,
    dev_size: usize,
    master_seed: u64,
) -> Result<Vec<Split>> {
    let mut seen = HashSet::with_capacity(instances.len());
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(Error::InvalidInstance {
                id: inst.id.clone(),
                reason: "duplicate id in corpus".into(),
            });
        }
    }
    // Fail on shortfalls once, up front, rather than in every split.
    let pools = label_pools(instances, spec)?;
    let remaining = instances.len() - spec.train_size;
    if remaining < dev_size {
        return Err(Error::InsufficientDev {
            available: remaining,
            required: dev_size,
        });
    }

    let all: Vec<usize> = (0..instances.len()).collect();
    (0..n_splits)
        .into_par_iter()
        .map(|split_index| {
            let seed = split_seed(master_seed, spec.task_id, split_index);
            Ok(draw_split(
                instances,
                &all,
                spec,
                &pools,
                dev_size,
                split_index,
                seed,
            ))
        })
        .collect()
}

/// Instance indices grouped by training stratum: one pool per label, or a
/// single pool for ECQA.
fn label_pools(instances: &[Instance], spec: &TaskSpec) -> Result<Vec<(Vec<usize>, usize)>> {
    match spec.shots_per_label {
        Some(shots) => spec
            .label_set
            .iter()
            .map(|label| {
                let pool: Vec<usize> = instances
                    .iter()
                    .enumerate()
                    .filter(|(_, i)| &i.label == label)
                    .map(|(k, _)| k)
                    .collect();
                if pool.len() < shots {
                    return Err(Error::InsufficientLabel {
                        label: label.clone(),
                        available: pool.len(),
                        required: shots,
                    });
                }
                Ok((pool, shots))
            })
            .collect(),
        None => {
            if instances.len() < spec.train_size {
                return Err(Error::InsufficientLabel {
                    label: "(any)".into(),
                    available: instances.len(),
                    required: spec.train_size,
                });
            }
            Ok(vec![((0..instances.len()).collect(), spec.train_size)])
        }
    }
}

fn draw_split(
    instances: &[Instance],
    all: &[usize],
    spec: &TaskSpec,
    pools: &[(Vec<usize>, usize)],
    dev_size: usize,
    split_index: usize,
    seed: u64,
) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: Vec<usize> = Vec::with_capacity(spec.train_size);
    for (pool, take) in pools {
        let mut pool = pool.clone();
        let (picked, _) = pool.partial_shuffle(&mut rng, *take);
        train.extend_from_slice(picked);
    }
    train.shuffle(&mut rng);

    // Everything outside the training set, in corpus order.
    let mut cuts = train.clone();
    cuts.sort_unstable();
    let mut rest: Vec<usize> = Vec::with_capacity(all.len() - cuts.len());
    let mut from = 0;
    for &k in &cuts {
        rest.extend_from_slice(&all[from..k]);
        from = k + 1;
    }
    rest.extend_from_slice(&all[from..]);
    let (dev, _) = rest.partial_shuffle(&mut rng, dev_size);

    let ids = |idx: &[usize]| idx.iter().map(|&k| instances[k].id.clone()).collect();
    Split {
        split_index,
        seed,
        train_ids: ids(&train),
        dev_ids: ids(dev),
    }
}

fn hash_ids(hasher: &mut Sha256, section: &str, ids: &[String]) {
    hasher.update(section.as_bytes());
    hasher.update((ids.len() as u64).to_le_bytes());
    for id in ids {
        hasher.update((id.len() as u64).to_le_bytes());
        hasher.update(id.as_bytes());
    }
}

/// Hex SHA-256 over the train ids and the dev ids, both in order.
pub fn split_digest(split: &Split) -> String {
    let mut hasher = Sha256::new();
    hash_ids(&mut hasher, "train", &split.train_ids);
    hash_ids(&mut hasher, "dev", &split.dev_ids);
    hex::encode(hasher.finalize())
}

/// Hex SHA-256 over a normalized corpus (ids, labels, explanations and fields in order).
pub fn corpus_digest(instances: &[Instance]) -> String {
    let mut hasher = Sha256::new();
    for inst in instances {
        let line = serde_json::to_string(inst).expect("serializable instance");
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestEntry {
    pub split_index: usize,
    pub digest: String,
}

/// The digest manifest written next to the split file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestManifest {
    pub task: TaskId,
    pub master_seed: u64,
    pub dev_size: usize,
    pub corpus_digest: String,
    pub splits: Vec<DigestEntry>,
}

impl DigestManifest {
    pub fn new(
        task: TaskId,
        master_seed: u64,
        dev_size: usize,
        instances: &[Instance],
        splits: &[Split],
    ) -> Self {
        DigestManifest {
            task,
            master_seed,
            dev_size,
            corpus_digest: corpus_digest(instances),
            splits: splits
                .iter()
                .map(|s| DigestEntry {
                    split_index: s.split_index,
                    digest: split_digest(s),
                })
                .collect(),
        }
    }
}

/// Check the structural invariants of a split against its corpus.
pub fn check_split(
    split: &Split,
    corpus: &crate::instance::Corpus,
    spec: &TaskSpec,
    dev_size: usize,
) -> Result<()> {
    let bad = |reason: String| Error::InvalidInstance {
        id: format!("split {}", split.split_index),
        reason,
    };
    if split.train_ids.len() != spec.train_size {
        return Err(bad(format!("train has {} ids", split.train_ids.len())));
    }
    if split.dev_ids.len() != dev_size {
        return Err(bad(format!("dev has {} ids", split.dev_ids.len())));
    }
    let train: HashSet<&str> = split.train_ids.iter().map(String::as_str).collect();
    if train.len() != split.train_ids.len() {
        return Err(bad("duplicate train id".into()));
    }
    let dev: HashSet<&str> = split.dev_ids.iter().map(String::as_str).collect();
    if dev.len() != split.dev_ids.len() {
        return Err(bad("duplicate dev id".into()));
    }
    if let Some(id) = train.intersection(&dev).next() {
        return Err(bad(format!("`{id}` is in both train and dev")));
    }
    if let Some(shots) = spec.shots_per_label {
        for label in &spec.label_set {
            let n = split
                .train_ids
                .iter()
                .map(|id| corpus.get(id))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .filter(|i| &i.label == label)
                .count();
            if n != shots {
                return Err(bad(format!(
                    "{n} train instances of `{label}`, expected {shots}"
                )));
            }
        }
    }
    Ok(())
}
