//! File-exchange protocol between the harness and a model.
//!
//! For each split the harness writes `requests.jsonl` (`{id, input}` per line)
//! and `exchange.json`; the model side answers with `responses.jsonl`
//! (`{id, output}` per line), one response per request id.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub id: String,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeResponse {
    pub id: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeCounts {
    pub train: usize,
    pub dev: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeManifest {
    pub run_id: String,
    pub split_index: usize,
    pub variant: String,
    pub counts: ExchangeCounts,
    /// Demonstrations packed into each dev prompt; empty outside in-context mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demo_counts: Vec<usize>,
}

/// How a response file fails to answer its requests.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResponseMismatch {
    pub missing: Vec<String>,
    pub unknown: Vec<String>,
    pub duplicate: Vec<String>,
}

impl ResponseMismatch {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.unknown.is_empty() && self.duplicate.is_empty()
    }

    pub fn describe(&self) -> String {
        fn list(ids: &[String]) -> String {
            const SHOWN: usize = 10;
            let mut s = ids
                .iter()
                .take(SHOWN)
                .cloned()
                .collect::<Vec<_>>()
                .join(", ");
            if ids.len() > SHOWN {
                s.push_str(&format!(" (+{} more)", ids.len() - SHOWN));
            }
            s
        }
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing ids: {}", list(&self.missing)));
        }
        if !self.unknown.is_empty() {
            parts.push(format!("unknown ids: {}", list(&self.unknown)));
        }
        if !self.duplicate.is_empty() {
            parts.push(format!("duplicate ids: {}", list(&self.duplicate)));
        }
        parts.join("; ")
    }
}

/// Compare response ids against request ids.
pub fn check_responses(
    requests: &[ExchangeRequest],
    responses: &[ExchangeResponse],
) -> ResponseMismatch {
    let wanted: HashSet<&str> = requests.iter().map(|r| r.id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut m = ResponseMismatch::default();
    for r in responses {
        if !wanted.contains(r.id.as_str()) {
            m.unknown.push(r.id.clone());
        } else if !seen.insert(r.id.as_str()) {
            m.duplicate.push(r.id.clone());
        }
    }
    m.missing = requests
        .iter()
        .filter(|r| !seen.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    m
}

/// Responses reordered to request order, or an error naming the bad ids.
pub fn align_responses(
    context: &str,
    requests: &[ExchangeRequest],
    responses: Vec<ExchangeResponse>,
) -> Result<Vec<ExchangeResponse>> {
    let m = check_responses(requests, &responses);
    if !m.is_empty() {
        let msg = format!("{context}: {}", m.describe());
        return Err(if m.unknown.is_empty() && m.duplicate.is_empty() {
            Error::MissingArtifact(msg)
        } else {
            Error::Config(msg)
        });
    }
    let mut by_id: std::collections::HashMap<String, ExchangeResponse> =
        responses.into_iter().map(|r| (r.id.clone(), r)).collect();
    Ok(requests
        .iter()
        .map(|q| by_id.remove(&q.id).expect("checked above"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: &str) -> ExchangeRequest {
        ExchangeRequest {
            id: id.into(),
            input: format!("in {id}"),
        }
    }

    fn resp(id: &str) -> ExchangeResponse {
        ExchangeResponse {
            id: id.into(),
            output: format!("out {id}"),
        }
    }

    #[test]
    fn exact_id_match() {
        let reqs = [req("a"), req("b"), req("c")];
        let got = align_responses("s", &reqs, vec![resp("c"), resp("a"), resp("b")]).unwrap();
        let ids: Vec<&str> = got.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);

        let m = check_responses(&reqs, &[resp("a"), resp("a"), resp("z")]);
        assert_eq!(m.missing, ["b", "c"]);
        assert_eq!(m.unknown, ["z"]);
        assert_eq!(m.duplicate, ["a"]);

        let e = align_responses("split 03", &reqs, vec![resp("a")]).unwrap_err();
        assert!(e.is_missing_artifact());
        assert!(e.to_string().contains("split 03: missing ids: b, c"));
        assert!(
            !align_responses("s", &reqs, vec![resp("a"), resp("b"), resp("c"), resp("d")])
                .unwrap_err()
                .is_missing_artifact()
        );
    }

    #[test]
    fn record_shapes() {
        assert_eq!(
            serde_json::to_string(&req("1")).unwrap(),
            r#"{"id":"1","input":"in 1"}"#
        );
        assert_eq!(
            serde_json::to_string(&resp("1")).unwrap(),
            r#"{"id":"1","output":"out 1"}"#
        );
        let m = ExchangeManifest {
            run_id: "r".into(),
            split_index: 2,
            variant: "qa_simple".into(),
            counts: ExchangeCounts {
                train: 48,
                dev: 350,
            },
            demo_counts: vec![],
        };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"run_id":"r","split_index":2,"variant":"qa_simple","counts":{"train":48,"dev":350}}"#
        );
    }
}
