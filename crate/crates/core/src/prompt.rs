//! Few-shot prompt assembly in the S2S and QA layouts, and seeded exemplar
//! sampling.
//!
//! S2S: each exemplar is the MR line, the reference line and a blank line;
//! the prompt ends with the test MR line. QA: each exemplar is a
//! `[PROMPT]: <mr>` line and a `[SENTENCE]: <reference>` line; the prompt
//! ends with the test MR's `[PROMPT]:` line and a bare `[SENTENCE]:` stub.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusItem;
use crate::mr::MrError;
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("{field} contains a newline")]
    EmbeddedNewline { field: &'static str },
    #[error("{field} is empty")]
    EmptyField { field: &'static str },
    #[error("{field} contains the marker {marker:?}")]
    MarkerCollision { field: &'static str, marker: String },
    #[error("group {group:?} has {available} records, {k} requested")]
    InsufficientCorpus {
        group: String,
        available: usize,
        k: usize,
    },
    #[error("record {key} has no dialogue act")]
    MissingDialogueAct { key: String },
    #[error(transparent)]
    Mr(#[from] MrError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptFormat {
    S2s,
    Qa,
}

impl PromptFormat {
    pub const ALL: [PromptFormat; 2] = [PromptFormat::S2s, PromptFormat::Qa];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptFormat::S2s => "s2s",
            PromptFormat::Qa => "qa",
        }
    }
}

impl std::str::FromStr for PromptFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s2s" => Ok(PromptFormat::S2s),
            "qa" => Ok(PromptFormat::Qa),
            other => Err(format!(
                "unknown prompt format {other:?} (expected s2s or qa)"
            )),
        }
    }
}

impl std::fmt::Display for PromptFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub mr: String,
    pub reference: String,
}

impl Exemplar {
    pub fn new(mr: impl Into<String>, reference: impl Into<String>) -> Self {
        Exemplar {
            mr: mr.into(),
            reference: reference.into(),
        }
    }

    /// Prompt-line serialization of a corpus item.
    pub fn from_item<T: CorpusItem + ?Sized>(item: &T) -> Result<Self, PromptError> {
        Ok(Exemplar {
            mr: item.mr().to_prompt_line()?,
            reference: item.reference().to_string(),
        })
    }
}

/// QA marker literals. `stub_trailing_space` adds a space after the final
/// sentence marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaMarkers {
    pub prompt: String,
    pub sentence: String,
    #[serde(default)]
    pub stub_trailing_space: bool,
}

impl Default for QaMarkers {
    fn default() -> Self {
        QaMarkers {
            prompt: "[PROMPT]:".into(),
            sentence: "[SENTENCE]:".into(),
            stub_trailing_space: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub format: PromptFormat,
    pub exemplars: Vec<Exemplar>,
    pub test_mr: String,
    pub rendered: String,
    pub stop_sequences: Vec<String>,
}

fn check_line(text: &str, field: &'static str) -> Result<(), PromptError> {
    if text.trim().is_empty() {
        return Err(PromptError::EmptyField { field });
    }
    if text.contains('\n') || text.contains('\r') {
        return Err(PromptError::EmbeddedNewline { field });
    }
    Ok(())
}

pub fn build_s2s(exemplars: &[Exemplar], test_mr: &str) -> Result<PromptBundle, PromptError> {
    let mut rendered = String::new();
    for e in exemplars {
        check_line(&e.mr, "exemplar MR")?;
        check_line(&e.reference, "exemplar reference")?;
        rendered.push_str(&e.mr);
        rendered.push('\n');
        rendered.push_str(&e.reference);
        rendered.push_str("\n\n");
    }
    check_line(test_mr, "test MR")?;
    rendered.push_str(test_mr);
    rendered.push('\n');
    Ok(PromptBundle {
        format: PromptFormat::S2s,
        exemplars: exemplars.to_vec(),
        test_mr: test_mr.to_string(),
        rendered,
        stop_sequences: vec!["\n\n".into()],
    })
}

pub fn build_qa(
    exemplars: &[Exemplar],
    test_mr: &str,
    markers: &QaMarkers,
) -> Result<PromptBundle, PromptError> {
    let collide = |text: &str, field: &'static str| -> Result<(), PromptError> {
        check_line(text, field)?;
        for m in [&markers.prompt, &markers.sentence] {
            if text.contains(m.as_str()) {
                return Err(PromptError::MarkerCollision {
                    field,
                    marker: m.clone(),
                });
            }
        }
        Ok(())
    };
    let mut rendered = String::new();
    for e in exemplars {
        collide(&e.mr, "exemplar MR")?;
        collide(&e.reference, "exemplar reference")?;
        rendered.push_str(&format!(
            "{} {}\n{} {}\n",
            markers.prompt, e.mr, markers.sentence, e.reference
        ));
    }
    collide(test_mr, "test MR")?;
    rendered.push_str(&format!(
        "{} {}\n{}",
        markers.prompt, test_mr, markers.sentence
    ));
    if markers.stub_trailing_space {
        rendered.push(' ');
    }
    Ok(PromptBundle {
        format: PromptFormat::Qa,
        exemplars: exemplars.to_vec(),
        test_mr: test_mr.to_string(),
        rendered,
        stop_sequences: vec![markers.prompt.clone(), "\n".into()],
    })
}

pub fn build(
    format: PromptFormat,
    exemplars: &[Exemplar],
    test_mr: &str,
    markers: &QaMarkers,
) -> Result<PromptBundle, PromptError> {
    match format {
        PromptFormat::S2s => build_s2s(exemplars, test_mr),
        PromptFormat::Qa => build_qa(exemplars, test_mr, markers),
    }
}

/// The last MR line of a rendered prompt: the line before the trailing QA
/// stub, or the final line of an S2S prompt.
pub fn final_mr_line<'a>(prompt: &'a str, markers: &QaMarkers) -> Option<&'a str> {
    let lines: Vec<&str> = prompt.lines().collect();
    let last = *lines.last()?;
    if last.trim_end() == markers.sentence.trim_end() {
        let mr = lines.get(lines.len().checked_sub(2)?)?;
        return Some(
            mr.strip_prefix(markers.prompt.as_str())
                .unwrap_or(mr)
                .trim(),
        );
    }
    Some(last.trim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    Uniform,
    PerDialogueAct,
}

/// What was sampled, for run manifests and leakage audits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub strategy: SamplingStrategy,
    pub k: usize,
    pub seed: u64,
    /// Sampled keys in sampled order.
    pub keys: Vec<String>,
    /// Per dialogue act (or "*" for uniform) sampled counts.
    pub per_group: BTreeMap<String, usize>,
    pub excluded: usize,
}

impl SampleManifest {
    /// Keys that also appear in `test_keys`; empty when there is no leakage.
    pub fn leaked<'a>(&'a self, test_keys: &BTreeSet<String>) -> Vec<&'a str> {
        self.keys
            .iter()
            .filter(|k| test_keys.contains(*k))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Sample<'a, T> {
    pub items: Vec<&'a T>,
    pub manifest: SampleManifest,
}

impl<T> Sample<'_, T> {
    /// Sampled items grouped by dialogue act, in sampled order.
    pub fn by_group(&self) -> BTreeMap<String, Vec<&T>>
    where
        T: CorpusItem,
    {
        let mut out: BTreeMap<String, Vec<&T>> = BTreeMap::new();
        for item in &self.items {
            out.entry(item.dialogue_act().unwrap_or("*").to_string())
                .or_default()
                .push(*item);
        }
        out
    }
}

fn draw<'a, T: CorpusItem>(
    mut pool: Vec<&'a T>,
    k: usize,
    seed: u64,
    group: &str,
) -> Result<Vec<&'a T>, PromptError> {
    if pool.len() < k {
        return Err(PromptError::InsufficientCorpus {
            group: group.to_string(),
            available: pool.len(),
            k,
        });
    }
    // Sorting first makes the draw independent of corpus file order.
    pool.sort_by(|a, b| a.key().cmp(b.key()));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, group));
    let (chosen, _) = pool.partial_shuffle(&mut rng, k);
    Ok(chosen.to_vec())
}

/// Samples exemplars without replacement, never returning a record whose
/// key is in `exclude`. `PerDialogueAct` draws `k` records from every
/// dialogue act present (groups in name order).
pub fn sample_exemplars<'a, T: CorpusItem>(
    corpus: &'a [T],
    k: usize,
    strategy: SamplingStrategy,
    seed: u64,
    exclude: &BTreeSet<String>,
) -> Result<Sample<'a, T>, PromptError> {
    let pool: Vec<&T> = corpus
        .iter()
        .filter(|r| !exclude.contains(r.key()))
        .collect();
    let excluded = corpus.len() - pool.len();
    let mut per_group = BTreeMap::new();
    let items = match strategy {
        SamplingStrategy::Uniform => {
            let items = draw(pool, k, seed, "*")?;
            per_group.insert("*".to_string(), items.len());
            items
        }
        SamplingStrategy::PerDialogueAct => {
            let mut groups: BTreeMap<&str, Vec<&T>> = BTreeMap::new();
            for r in pool {
                let da = r
                    .dialogue_act()
                    .ok_or_else(|| PromptError::MissingDialogueAct {
                        key: r.key().to_string(),
                    })?;
                groups.entry(da).or_default().push(r);
            }
            let mut items = Vec::new();
            for (da, members) in groups {
                let drawn = draw(members, k, seed, da)?;
                per_group.insert(da.to_string(), drawn.len());
                items.extend(drawn);
            }
            items
        }
    };
    let keys = items.iter().map(|r| r.key().to_string()).collect();
    Ok(Sample {
        items,
        manifest: SampleManifest {
            strategy,
            k,
            seed,
            keys,
            per_group,
            excluded,
        },
    })
}
