//! Reference-based surface similarity: a local character n-gram F-score and
//! a client for remote learned scorers.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHRF_MAX_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Character n-gram F-score (chrF) with n = 1..=6 and β = 2, whitespace
/// removed. Precision and recall are averaged over the orders for which at
/// least one side has n-grams, then combined. Scores are only comparable
/// within one run configuration.
pub fn surface_similarity(candidate: &str, reference: &str) -> f64 {
    chrf(candidate, reference, CHRF_MAX_ORDER, CHRF_BETA)
}

pub fn chrf(candidate: &str, reference: &str, max_order: usize, beta: f64) -> f64 {
    let hyp: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let refc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    for n in 1..=max_order {
        let h = char_ngrams(&hyp, n);
        let r = char_ngrams(&refc, n);
        let h_total: usize = h.values().sum();
        let r_total: usize = r.values().sum();
        if h_total == 0 && r_total == 0 {
            continue;
        }
        let matches: usize = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        if h_total > 0 {
            p_sum += matches as f64 / h_total as f64;
        }
        if r_total > 0 {
            r_sum += matches as f64 / r_total as f64;
        }
        orders += 1;
    }
    if orders == 0 {
        // Both sides are empty after whitespace removal.
        return 1.0;
    }
    let p = p_sum / orders as f64;
    let r = r_sum / orders as f64;
    if p == 0.0 && r == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer request failed: {0}")]
    Transport(String),
    #[error("scorer returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("scorer returned {got} scores for {expected} pairs")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorePair {
    pub candidate: String,
    pub reference: String,
}

impl ScorePair {
    pub fn new(candidate: impl Into<String>, reference: impl Into<String>) -> Self {
        ScorePair {
            candidate: candidate.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub pairs: Vec<ScorePair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
    #[serde(default)]
    pub model_id: Option<String>,
}

/// Anything that scores candidate/reference pairs. Reports label each score
/// column with `scorer_id` so different scorers are never mixed.
pub trait SurfaceScorer: Send + Sync {
    fn scorer_id(&self) -> String;
    fn score_pairs(&self, pairs: &[ScorePair]) -> Result<Vec<f64>, ScorerError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChrfScorer;

impl SurfaceScorer for ChrfScorer {
    fn scorer_id(&self) -> String {
        "chrf".to_string()
    }

    fn score_pairs(&self, pairs: &[ScorePair]) -> Result<Vec<f64>, ScorerError> {
        Ok(pairs
            .iter()
            .map(|p| surface_similarity(&p.candidate, &p.reference))
            .collect())
    }
}

/// HTTP client for a scorer exposing `POST /score`.
pub struct RemoteScorer {
    base_url: String,
    client: reqwest::blocking::Client,
    model_id: std::sync::Mutex<Option<String>>,
}

impl RemoteScorer {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        Ok(RemoteScorer {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            model_id: Default::default(),
        })
    }

    /// The model id reported by the most recent response.
    pub fn model_id(&self) -> Option<String> {
        self.model_id.lock().expect("model id lock").clone()
    }
}

impl SurfaceScorer for RemoteScorer {
    fn scorer_id(&self) -> String {
        match self.model_id() {
            Some(m) => format!("remote:{m}"),
            None => format!("remote:{}", self.base_url),
        }
    }

    fn score_pairs(&self, pairs: &[ScorePair]) -> Result<Vec<f64>, ScorerError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let body = ScoreRequest {
            pairs: pairs.to_vec(),
        };
        let resp = self
            .client
            .post(format!("{}/score", self.base_url))
            .json(&body)
            .send()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ScorerError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: ScoreResponse =
            serde_json::from_str(&text).map_err(|e| ScorerError::Malformed(e.to_string()))?;
        if parsed.scores.len() != pairs.len() {
            return Err(ScorerError::LengthMismatch {
                expected: pairs.len(),
                got: parsed.scores.len(),
            });
        }
        if let Some(m) = parsed.model_id {
            *self.model_id.lock().expect("model id lock") = Some(m);
        }
        Ok(parsed.scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(
            surface_similarity("Babbo is a bistro.", "Babbo is a bistro."),
            1.0
        );
        assert_eq!(surface_similarity("abc", "xyz"), 0.0);
    }

    #[test]
    fn whitespace_is_ignored() {
        assert_eq!(surface_similarity("a b c", "abc"), 1.0);
    }

    #[test]
    fn request_wire_shape() {
        let req = ScoreRequest {
            pairs: vec![ScorePair::new("a", "b")],
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"pairs":[{"candidate":"a","reference":"b"}]}"#
        );
        let resp: ScoreResponse =
            serde_json::from_str(r#"{"scores":[0.5],"model_id":"m"}"#).unwrap();
        assert_eq!(resp.scores, [0.5]);
    }

    proptest! {
        #[test]
        fn bounded_and_identity(a in "[a-e ]{1,20}", b in "[a-e ]{1,20}") {
            let s = surface_similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(surface_similarity(&a, &a), 1.0);
            let suffix = "zz y";
            prop_assert!((surface_similarity(&(a.clone() + suffix), &(a.clone() + suffix)) - 1.0).abs() < 1e-9);
        }
    }
}
