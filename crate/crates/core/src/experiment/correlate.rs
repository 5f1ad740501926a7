use std::collections::BTreeMap;

use serde::Serialize;

use super::{fmt2, fmt_p, ExperimentError, ItemScore};
use crate::annotation::{AnnotationError, AnnotationRecord};
use crate::metrics::{pearson, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    /// Model name, or "overall".
    pub group: String,
    /// `semantic_accuracy` or `coherence`.
    pub human_metric: String,
    pub n: usize,
    pub r: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub rows: Vec<CorrelationRow>,
}

/// Pearson correlation between the automatic surface score and each human
/// metric, per model and overall. Every label joins with the score of the
/// item it refers to; several raters give several points.
pub fn correlate(
    scores: &[ItemScore],
    labels: &[AnnotationRecord],
) -> Result<CorrelationTable, ExperimentError> {
    let by_key: BTreeMap<&str, &ItemScore> = scores
        .iter()
        .filter(|s| s.surface.is_some())
        .map(|s| (s.item_key.as_str(), s))
        .collect();
    let mut joined: Vec<(&ItemScore, &AnnotationRecord)> = labels
        .iter()
        .filter_map(|l| by_key.get(l.item_key.as_str()).map(|s| (*s, l)))
        .collect();
    if joined.is_empty() {
        return Err(AnnotationError::EmptyGroup("scores joined with annotations".into()).into());
    }
    joined.sort_by(|a, b| (&a.1.item_key, &a.1.rater_id).cmp(&(&b.1.item_key, &b.1.rater_id)));

    let mut groups: BTreeMap<String, Vec<(&ItemScore, &AnnotationRecord)>> = BTreeMap::new();
    for pair in &joined {
        groups
            .entry(pair.0.backend.clone())
            .or_default()
            .push(*pair);
    }
    groups.insert("overall".into(), joined.clone());

    let mut rows = Vec::new();
    for (group, pairs) in &groups {
        let x: Vec<f64> = pairs
            .iter()
            .map(|(s, _)| s.surface.expect("filtered"))
            .collect();
        let humans: [(&str, Vec<f64>); 2] = [
            (
                "semantic_accuracy",
                pairs
                    .iter()
                    .map(|(_, l)| {
                        if l.total == 0 {
                            1.0
                        } else {
                            l.realized as f64 / l.total as f64
                        }
                    })
                    .collect(),
            ),
            (
                "coherence",
                pairs.iter().map(|(_, l)| l.coherence as f64).collect(),
            ),
        ];
        for (name, y) in humans {
            let mut row = CorrelationRow {
                group: group.clone(),
                human_metric: name.into(),
                n: x.len(),
                r: None,
                p_value: None,
                note: None,
            };
            match pearson(&x, &y) {
                Ok(res) => {
                    row.r = res.pearson_r;
                    row.p_value = res.p_value;
                }
                Err(StatsError::DegenerateSample { reason, .. }) => row.note = Some(reason),
                Err(e) => row.note = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    Ok(CorrelationTable { rows })
}

impl CorrelationTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| group | human metric | n | r | p | note |\n|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                r.group,
                r.human_metric,
                r.n,
                fmt2(r.r),
                fmt_p(r.p_value),
                r.note.as_deref().unwrap_or("")
            ));
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let full = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut s = String::from("group\thuman_metric\tn\tr\tp\tnote\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.group,
                r.human_metric,
                r.n,
                full(r.r),
                full(r.p_value),
                r.note.as_deref().unwrap_or("")
            ));
        }
        s
    }
}
