//! Slot aligner: decides which triples or slots of an MR are realized in a
//! text, and reports semantic accuracy as realized / total.

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::normalize::{contains_phrase, match_tokens, year_words};
use crate::mr::{KgMr, MeaningRepresentation, ViggoMr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMatch {
    /// `subject|relation|object` for triples, the attribute name for slots.
    pub key: String,
    pub matched: bool,
    /// The surface form that matched, when any did.
    pub matched_span: Option<String>,
    /// KG only: whether the relation label itself appears in the text.
    /// Reported for inspection; it does not affect `matched`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_mentioned: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub realized: usize,
    pub total: usize,
    pub ratio: f64,
    pub per_slot: Vec<SlotMatch>,
    /// Missing lexicon entries that forced verbatim matching.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AlignmentReport {
    fn from_matches(per_slot: Vec<SlotMatch>, warnings: Vec<String>) -> Self {
        let total = per_slot.len();
        let realized = per_slot.iter().filter(|m| m.matched).count();
        // An MR with no slots has nothing to get wrong.
        let ratio = if total == 0 {
            1.0
        } else {
            realized as f64 / total as f64
        };
        AlignmentReport {
            realized,
            total,
            ratio,
            per_slot,
            warnings,
        }
    }
}

/// Semantic accuracy of `text` against `mr`.
///
/// A triple counts as realized when its object (or a lexicon variant keyed by
/// the relation) occurs in the normalized text as a whole-token phrase. A
/// Viggo slot counts when every one of its values (or a variant) occurs;
/// boolean values match through lexicon variants and empty-valued slots
/// through keyword rules. The dialogue act is not counted.
pub fn semantic_accuracy(
    mr: &MeaningRepresentation,
    text: &str,
    lexicon: &Lexicon,
) -> AlignmentReport {
    let tokens = match_tokens(text);
    match mr {
        MeaningRepresentation::Kg(kg) => align_kg(kg, &tokens, lexicon),
        MeaningRepresentation::Viggo(v) => align_viggo(v, &tokens, lexicon),
    }
}

fn first_match(tokens: &[String], candidates: &[String]) -> Option<String> {
    candidates
        .iter()
        .find(|c| contains_phrase(tokens, &match_tokens(c)))
        .cloned()
}

fn value_candidates(value: &str, extra: Option<&[String]>) -> Vec<String> {
    let mut out = vec![value.to_string()];
    if let Some(variants) = extra {
        out.extend(variants.iter().cloned());
    }
    out.extend(year_words(value));
    out
}

fn align_kg(mr: &KgMr, tokens: &[String], lexicon: &Lexicon) -> AlignmentReport {
    let per_slot = mr
        .triples()
        .iter()
        .map(|t| {
            let candidates =
                value_candidates(t.object(), lexicon.variants(t.relation(), t.object()));
            let span = first_match(tokens, &candidates);
            SlotMatch {
                key: format!("{}|{}|{}", t.subject(), t.relation(), t.object()),
                matched: span.is_some(),
                matched_span: span,
                relation_mentioned: Some(contains_phrase(tokens, &match_tokens(t.relation()))),
            }
        })
        .collect();
    AlignmentReport::from_matches(per_slot, Vec::new())
}

fn is_boolean_value(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "yes" | "no")
}

fn align_viggo(mr: &ViggoMr, tokens: &[String], lexicon: &Lexicon) -> AlignmentReport {
    let mut warnings = Vec::new();
    let mut per_slot = Vec::with_capacity(mr.slots().len());
    for slot in mr.slots() {
        let attr = slot.attribute();
        if slot.values().is_empty() {
            let keywords = match lexicon.keywords(attr) {
                Some(k) => k.to_vec(),
                None => {
                    warnings.push(format!(
                        "no keyword rule for empty slot {attr}; matching the attribute name"
                    ));
                    vec![attr.replace('_', " ")]
                }
            };
            let span = first_match(tokens, &keywords);
            per_slot.push(SlotMatch {
                key: attr.to_string(),
                matched: span.is_some(),
                matched_span: span,
                relation_mentioned: None,
            });
            continue;
        }

        let mut spans = Vec::new();
        let mut all = true;
        for value in slot.values() {
            let variants = lexicon.variants(attr, value);
            let candidates = match variants {
                Some(v) if is_boolean_value(value) => v.to_vec(),
                None if is_boolean_value(value) => {
                    warnings.push(format!(
                        "no lexicon entry for {attr}={value}; matching verbatim"
                    ));
                    value_candidates(value, None)
                }
                other => value_candidates(value, other),
            };
            match first_match(tokens, &candidates) {
                Some(s) => spans.push(s),
                None => {
                    all = false;
                    break;
                }
            }
        }
        per_slot.push(SlotMatch {
            key: attr.to_string(),
            matched: all,
            matched_span: all.then(|| spans.join(" ; ")),
            relation_mentioned: None,
        });
    }
    AlignmentReport::from_matches(per_slot, warnings)
}
