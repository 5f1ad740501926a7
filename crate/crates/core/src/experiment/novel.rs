use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{
    run_jobs, ExperimentConfig, ExperimentError, Job, RenderedReport, RunEnv, RunManifest,
};
use crate::annotation::{aggregate, AnnotationItem, AnnotationRecord, GroupBy, SummaryTable};
use crate::client::GenerationRecord;
use crate::mr::{KgMr, MeaningRepresentation, Topic};
use crate::prompt::{build, Exemplar};
use crate::util::sha256_hex;

/// The fixed two-shot pair used for every novel MR.
pub fn novel_exemplars() -> [Exemplar; 2] {
    [
        Exemplar::new(
            "Starship = song = We Built This City | We Built This City = genre = pop rock",
            "Starship plays pop rock like the song We Built This City. Do you like that genre?",
        ),
        Exemplar::new(
            "Planet of the Apes = cast member = Felix Silla",
            "I heard Felix Silla starred in a good movie, called Planet of the Apes.",
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NovelMr {
    pub id: String,
    pub mr: KgMr,
}

/// Reads `id<TAB>topic<TAB>mr` lines; blank lines and `#` comments are
/// skipped. The MR may be in either KG form.
pub fn read_novel_mrs(path: &Path) -> Result<Vec<NovelMr>, ExperimentError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |reason: String| ExperimentError::Input {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, topic, mr] = cols[..] else {
            return Err(err(format!(
                "expected 3 tab-separated columns, found {}",
                cols.len()
            )));
        };
        let topic: Topic = topic.parse().map_err(|e| err(format!("{e}")))?;
        let mr = match MeaningRepresentation::parse_any(mr).map_err(|e| err(e.to_string()))? {
            MeaningRepresentation::Kg(kg) => kg.with_topic(topic),
            MeaningRepresentation::Viggo(_) => return Err(err("not a KG MR".into())),
        };
        out.push(NovelMr {
            id: id.trim().to_string(),
            mr,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NovelRun {
    pub manifest_digest: String,
    /// One item per generated candidate.
    pub package: Vec<AnnotationItem>,
    pub failures: Vec<String>,
    #[serde(skip)]
    pub manifest: RunManifest,
}

/// Generates outputs for MRs that have no reference text and packages them
/// for human labeling. No surface similarity is computed.
pub fn run_novel(
    cfg: &ExperimentConfig,
    mrs: &[NovelMr],
    env: &RunEnv,
) -> Result<NovelRun, ExperimentError> {
    cfg.check()?;
    let mut manifest = RunManifest::new("novel", cfg);
    let listing: String = mrs
        .iter()
        .map(|m| {
            Ok(format!(
                "{}\t{}\t{}\n",
                m.id,
                m.mr.topic(),
                crate::mr::serialize_kg_paren(&m.mr)?
            ))
        })
        .collect::<Result<_, ExperimentError>>()?;
    manifest
        .inputs
        .insert("novel_mrs".into(), sha256_hex(listing.as_bytes()));
    manifest.exemplars.insert(
        "novel".into(),
        novel_exemplars().iter().map(|e| e.mr.clone()).collect(),
    );
    manifest
        .test_keys
        .insert("novel".into(), mrs.iter().map(|m| m.id.clone()).collect());

    let exemplars = novel_exemplars();
    let mut package = Vec::new();
    let mut failures = Vec::new();
    let mut outcomes_all = Vec::new();
    for backend in &cfg.backends {
        let client = env.client(backend)?;
        let jobs = mrs
            .iter()
            .map(|m| {
                let mr = MeaningRepresentation::Kg(m.mr.clone());
                let bundle = build(
                    cfg.novel_format,
                    &exemplars,
                    &mr.to_prompt_line()?,
                    &cfg.qa_markers,
                )?;
                Ok(Job {
                    test_key: m.id.clone(),
                    group: m.mr.topic().to_string(),
                    mr,
                    reference: None,
                    prompt: bundle.rendered,
                    stops: bundle.stop_sequences,
                    tags: BTreeMap::from([
                        ("model".to_string(), backend.clone()),
                        ("topic".to_string(), m.mr.topic().to_string()),
                        ("novel_id".to_string(), m.id.clone()),
                    ]),
                })
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        let outcomes = run_jobs(client, cfg, &jobs);
        for (job, out) in jobs.iter().zip(&outcomes) {
            match &out.record {
                Some(rec) => package.extend(items_for(job, rec, backend)),
                None => failures.push(format!(
                    "{backend}: {}",
                    out.error.clone().unwrap_or_default()
                )),
            }
        }
        outcomes_all.extend(outcomes);
    }
    manifest.set_generations(&outcomes_all);
    Ok(NovelRun {
        manifest_digest: manifest.digest(),
        package,
        failures,
        manifest,
    })
}

fn items_for(job: &Job, rec: &GenerationRecord, backend: &str) -> Vec<AnnotationItem> {
    let mr = rec.mr.clone().unwrap_or_default();
    rec.candidates
        .iter()
        .enumerate()
        .map(|(i, text)| AnnotationItem {
            item_key: crate::annotation::item_key(&rec.cache_key, i),
            model: backend.to_string(),
            topic: job.group.clone(),
            dialogue_act: None,
            mr: mr.clone(),
            text: text.clone(),
            total: job.mr.content_count(),
        })
        .collect()
}

impl NovelRun {
    /// The annotation package, one JSON item per line.
    pub fn package_jsonl(&self) -> String {
        self.package
            .iter()
            .map(|i| serde_json::to_string(i).expect("item serializes") + "\n")
            .collect()
    }

    /// Human-metric summary by model and by topic once labels exist; before
    /// that, item counts only.
    pub fn render(&self, labels: &[AnnotationRecord]) -> Result<RenderedReport, ExperimentError> {
        let mut md = format!("# Novel MRs\n\nManifest: `{}`\n\n", self.manifest_digest);
        let mut tsv = Vec::new();
        let keys: std::collections::BTreeSet<&str> =
            self.package.iter().map(|i| i.item_key.as_str()).collect();
        let ours: Vec<AnnotationRecord> = labels
            .iter()
            .filter(|r| keys.contains(r.item_key.as_str()))
            .cloned()
            .collect();
        let mut tables: Vec<SummaryTable> = Vec::new();
        if ours.is_empty() {
            let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for i in &self.package {
                *counts.entry((&i.model, &i.topic)).or_default() += 1;
            }
            md.push_str(&format!(
                "{} items packaged for labeling; no labels yet.\n\n",
                self.package.len()
            ));
            md.push_str("| model | topic | items |\n|---|---|---|\n");
            let mut t = String::from("model\ttopic\titems\n");
            for ((m, topic), n) in counts {
                md.push_str(&format!("| {m} | {topic} | {n} |\n"));
                t.push_str(&format!("{m}\t{topic}\t{n}\n"));
            }
            tsv.push(("items".to_string(), t));
        } else {
            for g in [GroupBy::Model, GroupBy::Topic] {
                let table = aggregate(&ours, g)?;
                md.push_str(&format!(
                    "## By {}\n\n{}\n",
                    if g == GroupBy::Model {
                        "model"
                    } else {
                        "topic"
                    },
                    table.to_markdown()
                ));
                tsv.push((
                    if g == GroupBy::Model {
                        "by_model"
                    } else {
                        "by_topic"
                    }
                    .to_string(),
                    table.to_tsv(),
                ));
                tables.push(table);
            }
        }
        if !self.failures.is_empty() {
            md.push_str("\n## Failures\n\n");
            for f in &self.failures {
                md.push_str(&format!("- {f}\n"));
            }
        }
        let json = serde_json::json!({"run": self, "summaries": tables});
        Ok(RenderedReport {
            markdown: md,
            tsv,
            json: serde_json::to_string_pretty(&json).expect("report serializes") + "\n",
            manifest: self.manifest.to_json(),
        })
    }
}
