//! Turn raw model output into a canonical (label, explanation) prediction.
//!
//! Parsing is total: any string yields a [`Prediction`], with failures
//! surfacing as an invalid label plus diagnostic flags.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::prompt::{answer_surfaces, PromptFamily, PromptVariant, SENTINELS};
use crate::task::TaskSpec;
use crate::text::{collapse_whitespace, normalize_label_text, upper_first};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFlag {
    NoBecause,
    SentinelMismatch,
    LabelFuzzyMatched,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "id")]
    pub instance_id: String,
    #[serde(skip)]
    pub raw_text: String,
    /// Canonical label, or `None` when the output matched no label (INVALID).
    pub label: Option<String>,
    pub explanation: String,
    pub flags: BTreeSet<ParseFlag>,
}

impl Prediction {
    pub fn is_invalid(&self) -> bool {
        self.label.is_none()
    }

    pub fn label_str(&self) -> &str {
        self.label.as_deref().unwrap_or(INVALID)
    }
}

pub const INVALID: &str = "INVALID";

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} / {:?}",
            self.instance_id,
            self.label_str(),
            self.explanation
        )
    }
}

/// Answer strings accepted for one instance under one prompt variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    /// `(surface, canonical)` in priority order.
    entries: Vec<(String, String)>,
    /// Canonical answers addressable by letter, `(A)` first. ECQA only.
    lettered: Vec<String>,
}

impl LabelVocabulary {
    /// Vocabulary for `variant`; `choices` supplies the per-instance answers of open-label tasks.
    pub fn new(spec: &TaskSpec, variant: &PromptVariant, choices: &[&str]) -> Self {
        let mut entries: Vec<(String, String)> = Vec::new();
        let mut lettered = Vec::new();
        match answer_surfaces(variant) {
            Some(surfaces) => {
                for (s, c) in surfaces {
                    entries.push((s.to_string(), c.to_string()));
                }
                // Canonical labels are accepted too unless a family surface
                // already claims the same normalized text.
                for label in &spec.label_set {
                    let norm = normalize_label_text(label);
                    if !entries.iter().any(|(s, _)| normalize_label_text(s) == norm) {
                        entries.push((label.clone(), label.clone()));
                    }
                }
            }
            None => {
                for c in choices {
                    entries.push((c.to_string(), c.to_string()));
                    lettered.push(c.to_string());
                }
            }
        }
        LabelVocabulary { entries, lettered }
    }

    pub fn for_instance(spec: &TaskSpec, variant: &PromptVariant, inst: &Instance) -> Self {
        Self::new(spec, variant, &inst.choices())
    }

    pub fn surfaces(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(s, c)| (s.as_str(), c.as_str()))
    }

    pub fn canonical_labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (_, c) in &self.entries {
            if !out.contains(&c.as_str()) {
                out.push(c);
            }
        }
        out
    }
}

/// Result of matching answer text against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatch {
    pub label: Option<String>,
    /// True when the match needed normalization (case, whitespace, punctuation, letters).
    pub fuzzy: bool,
}

pub fn canonicalize_label(text: &str, vocab: &LabelVocabulary) -> LabelMatch {
    let trimmed = text.trim();
    if let Some((_, c)) = vocab.entries.iter().find(|(s, _)| s == trimmed) {
        return LabelMatch {
            label: Some(c.clone()),
            fuzzy: false,
        };
    }
    let norm = normalize_label_text(trimmed);
    if norm.is_empty() {
        return LabelMatch {
            label: None,
            fuzzy: false,
        };
    }
    if let Some((_, c)) = vocab
        .entries
        .iter()
        .find(|(s, _)| normalize_label_text(s) == norm)
    {
        return LabelMatch {
            label: Some(c.clone()),
            fuzzy: true,
        };
    }
    if let Some(label) = match_letter(trimmed, &vocab.lettered) {
        return LabelMatch {
            label: Some(label),
            fuzzy: true,
        };
    }
    LabelMatch {
        label: None,
        fuzzy: false,
    }
}

/// `A`, `(A)`, `(a).` or `(A) <choice text>` against lettered choices.
fn match_letter(text: &str, lettered: &[String]) -> Option<String> {
    if lettered.is_empty() {
        return None;
    }
    let t = text.trim();
    let (letter, rest) = if let Some(inner) = t.strip_prefix('(') {
        let close = inner.find(')')?;
        (inner[..close].to_string(), inner[close + 1..].trim())
    } else {
        (normalize_label_text(t), "")
    };
    let mut chars = letter.trim().chars();
    let c = chars.next()?.to_ascii_uppercase();
    if chars.next().is_some() || !c.is_ascii_uppercase() {
        return None;
    }
    let idx = (c as u8 - b'A') as usize;
    let choice = lettered.get(idx)?;
    let rest = normalize_label_text(rest);
    if rest.is_empty() || rest == normalize_label_text(choice) {
        Some(choice.clone())
    } else {
        None
    }
}

/// Drop decoder artifacts (`<pad>`, `</s>`) that often surround generations.
fn strip_decoder_tokens(text: &str) -> String {
    text.replace("<pad>", " ").replace("</s>", " ")
}

const BECAUSE: &str = " because ";

pub fn parse_output(
    instance_id: &str,
    text: &str,
    variant: &PromptVariant,
    vocab: &LabelVocabulary,
) -> Prediction {
    let mut flags = BTreeSet::new();
    let (label_text, explanation) = match variant.family {
        PromptFamily::InfillingBasic | PromptFamily::InfillingNatural => {
            split_sentinels(&strip_decoder_tokens(text), &mut flags)
        }
        PromptFamily::Incontext => split_completion(text, &mut flags),
        _ => split_because(&strip_decoder_tokens(text), &mut flags),
    };
    let matched = canonicalize_label(&label_text, vocab);
    if matched.fuzzy {
        flags.insert(ParseFlag::LabelFuzzyMatched);
    }
    Prediction {
        instance_id: instance_id.to_string(),
        raw_text: text.to_string(),
        label: matched.label,
        explanation,
        flags,
    }
}

fn split_because(text: &str, flags: &mut BTreeSet<ParseFlag>) -> (String, String) {
    let text = text.trim();
    if let Some(pos) = text.find(BECAUSE) {
        let label = &text[..pos];
        let rest = collapse_whitespace(&text[pos + BECAUSE.len()..]);
        return (label.to_string(), upper_first(&rest));
    }
    if let Some(label) = text.strip_suffix(" because") {
        flags.insert(ParseFlag::Truncated);
        return (label.to_string(), String::new());
    }
    flags.insert(ParseFlag::NoBecause);
    (text.to_string(), String::new())
}

fn split_sentinels(text: &str, flags: &mut BTreeSet<ParseFlag>) -> (String, String) {
    let [s0, s1, s2] = SENTINELS;
    let p0 = text.find(s0);
    let p1 = text.find(s1);
    if p0.is_none() || p1.is_none() || p1 < p0 {
        flags.insert(ParseFlag::SentinelMismatch);
    }
    let (label, rest) = match p1 {
        Some(p) if p0.is_none_or(|q| q < p) => (&text[..p], Some(&text[p + s1.len()..])),
        _ => {
            // No usable <extra_id_1>: treat everything as the label span.
            flags.insert(ParseFlag::SentinelMismatch);
            (text, None)
        }
    };
    let label = label.replacen(s0, "", 1);
    let explanation = match rest {
        None => String::new(),
        Some(rest) => match rest.find(s2) {
            Some(end) => collapse_whitespace(&rest[..end]),
            None => {
                flags.insert(ParseFlag::Truncated);
                collapse_whitespace(rest)
            }
        },
    };
    (label.trim().to_string(), explanation)
}

fn is_block_header(line: &str) -> bool {
    ["Post:", "Question:", "Choice", "Answer:"]
        .iter()
        .any(|h| line.starts_with(h))
}

fn split_completion(text: &str, flags: &mut BTreeSet<ParseFlag>) -> (String, String) {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    // The prompt ends in "Answer:", so the completion normally starts with the
    // answer itself. Models sometimes repeat the "Answer:" header.
    let (answer_idx, answer) = match lines.iter().position(|l| !l.is_empty()) {
        Some(i) if lines[i].starts_with("Reason:") => {
            flags.insert(ParseFlag::Truncated);
            (i, String::new())
        }
        Some(i) => {
            let line = lines[i];
            let answer = line.strip_prefix("Answer:").unwrap_or(line);
            (i, answer.trim().to_string())
        }
        None => {
            flags.insert(ParseFlag::Truncated);
            (0, String::new())
        }
    };

    let mut reason: Option<Vec<&str>> = None;
    for line in lines.iter().skip(answer_idx) {
        match &mut reason {
            None => {
                if let Some(r) = line.strip_prefix("Reason:") {
                    reason = Some(vec![r.trim()]);
                }
            }
            Some(parts) => {
                if line.is_empty() || is_block_header(line) || line.starts_with("Reason:") {
                    break;
                }
                parts.push(line);
            }
        }
    }
    let explanation = match reason {
        Some(parts) => collapse_whitespace(&parts.join(" ")),
        None => {
            flags.insert(ParseFlag::Truncated);
            String::new()
        }
    };
    (answer, explanation)
}
