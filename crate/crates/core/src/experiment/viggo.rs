use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{
    fmt2, item_means, mean, paired_row, run_jobs, score_outcomes, significance_markdown,
    significance_tsv, ExperimentConfig, ExperimentError, ItemScore, Job, Metric, RenderedReport,
    RunEnv, RunManifest, SignificanceRow,
};
use crate::corpus::{CorpusItem, Split, ViggoRecord};
use crate::metrics::DaVerdict;
use crate::prompt::{
    build, sample_exemplars, Exemplar, PromptError, PromptFormat, SamplingStrategy,
};
use crate::util::{derive_seed, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViggoCell {
    pub backend: String,
    pub format: PromptFormat,
    pub k: usize,
    pub n: usize,
    pub failed: usize,
    pub surface: Option<f64>,
    pub semantic_accuracy: Option<f64>,
    /// Percentage of candidates whose dialogue act was judged a match.
    pub da_match_pct: Option<f64>,
    pub da_uncertain_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViggoReport {
    pub manifest_digest: String,
    pub scorer: String,
    pub test_items: usize,
    pub cells: Vec<ViggoCell>,
    pub significance: Vec<SignificanceRow>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub items: Vec<ItemScore>,
    #[serde(skip)]
    pub manifest: RunManifest,
}

/// k-shot comparison on Viggo: every (k, format, backend) cell prompts each
/// test item with the `k` exemplars sampled for its dialogue act.
pub fn run_viggo(
    cfg: &ExperimentConfig,
    corpus: &[ViggoRecord],
    env: &RunEnv,
) -> Result<ViggoReport, ExperimentError> {
    cfg.check()?;
    let mut manifest = RunManifest::new("viggo", cfg);
    let mut sorted: Vec<&ViggoRecord> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.key().cmp(b.key()));
    let listing: String = sorted
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\n",
                r.key,
                crate::mr::serialize_viggo_mr(&r.mr),
                r.reference
            )
        })
        .collect();
    manifest
        .inputs
        .insert("viggo_corpus".into(), sha256_hex(listing.as_bytes()));
    manifest.scorer = Some(env.scorer.scorer_id());

    let train: Vec<ViggoRecord> = sorted
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| (*r).clone())
        .collect();
    let mut test: Vec<&ViggoRecord> = sorted
        .iter()
        .copied()
        .filter(|r| r.split == Split::Test)
        .collect();
    test.sort_by_cached_key(|r| {
        (
            derive_seed(cfg.seed, &format!("viggo-test|{}", r.key)),
            r.key.clone(),
        )
    });
    test.truncate(cfg.viggo_test_size);
    test.sort_by(|a, b| a.key.cmp(&b.key));
    if test.len() < cfg.viggo_test_size {
        manifest.warnings.push(format!(
            "{} test items, wanted {}",
            test.len(),
            cfg.viggo_test_size
        ));
    }
    let test_keys: BTreeSet<String> = test.iter().map(|r| r.key.clone()).collect();
    manifest
        .test_keys
        .insert("viggo".into(), test_keys.iter().cloned().collect());

    let mut by_k: BTreeMap<usize, BTreeMap<String, Vec<Exemplar>>> = BTreeMap::new();
    for &k in &cfg.viggo_ks {
        let sample = sample_exemplars(
            &train,
            k,
            SamplingStrategy::PerDialogueAct,
            derive_seed(cfg.seed, &format!("viggo|{k}")),
            &test_keys,
        )?;
        manifest
            .exemplars
            .insert(format!("k={k}"), sample.manifest.keys.clone());
        manifest
            .exemplar_counts
            .insert(format!("k={k}"), sample.manifest.per_group.clone());
        let groups = sample
            .by_group()
            .into_iter()
            .map(|(da, items)| {
                Ok((
                    da,
                    items
                        .into_iter()
                        .map(Exemplar::from_item)
                        .collect::<Result<Vec<_>, _>>()?,
                ))
            })
            .collect::<Result<BTreeMap<_, _>, PromptError>>()?;
        by_k.insert(k, groups);
    }

    let mut scores = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let mut failed: BTreeMap<(String, PromptFormat, usize), usize> = BTreeMap::new();
    let mut outcomes_all = Vec::new();
    for backend in &cfg.backends {
        let client = env.client(backend)?;
        for &format in &cfg.formats {
            for &k in &cfg.viggo_ks {
                let mut jobs = Vec::new();
                for item in &test {
                    let da = item.mr.dialogue_act().to_string();
                    let exemplars =
                        by_k[&k]
                            .get(&da)
                            .ok_or_else(|| PromptError::InsufficientCorpus {
                                group: da.clone(),
                                available: 0,
                                k,
                            })?;
                    let mr = item.mr();
                    let bundle = build(format, exemplars, &mr.to_prompt_line()?, &cfg.qa_markers)?;
                    jobs.push(Job {
                        test_key: item.key.clone(),
                        group: da.clone(),
                        mr,
                        reference: Some(item.reference.clone()),
                        prompt: bundle.rendered,
                        stops: bundle.stop_sequences,
                        tags: BTreeMap::from([
                            ("format".to_string(), format.to_string()),
                            ("k".to_string(), k.to_string()),
                            ("model".to_string(), backend.clone()),
                            ("topic".to_string(), "video_games".to_string()),
                        ]),
                    });
                }
                let outcomes = run_jobs(client, cfg, &jobs);
                for out in &outcomes {
                    if let Some(e) = &out.error {
                        *failed.entry((backend.clone(), format, k)).or_default() += 1;
                        failures.push(format!("{backend}/{format}/k={k}: {e}"));
                    }
                }
                let (s, w) = score_outcomes(env, &jobs, &outcomes, |_| {
                    (backend.clone(), format, k, None)
                });
                scores.extend(s);
                warnings.extend(w);
                outcomes_all.extend(outcomes);
            }
        }
    }
    manifest.set_generations(&outcomes_all);
    scores.sort_by(|a, b| {
        (&a.backend, a.format, a.k, &a.test_key, &a.item_key).cmp(&(
            &b.backend,
            b.format,
            b.k,
            &b.test_key,
            &b.item_key,
        ))
    });

    let mut cells = Vec::new();
    let mut significance = Vec::new();
    for backend in &cfg.backends {
        for &format in &cfg.formats {
            let of_k = |k: usize| {
                scores
                    .iter()
                    .filter(move |s| &s.backend == backend && s.format == format && s.k == k)
            };
            for &k in &cfg.viggo_ks {
                let surface = item_means(of_k(k), |s| s.surface);
                let sa = item_means(of_k(k), |s| Some(s.semantic_accuracy));
                let verdicts: Vec<DaVerdict> = of_k(k).filter_map(|s| s.da_match).collect();
                let pct = |v: DaVerdict| {
                    (!verdicts.is_empty()).then(|| {
                        100.0 * verdicts.iter().filter(|x| **x == v).count() as f64
                            / verdicts.len() as f64
                    })
                };
                cells.push(ViggoCell {
                    backend: backend.clone(),
                    format,
                    k,
                    n: sa.len(),
                    failed: failed
                        .get(&(backend.clone(), format, k))
                        .copied()
                        .unwrap_or(0),
                    surface: mean(surface.values().copied()),
                    semantic_accuracy: mean(sa.values().copied()),
                    da_match_pct: pct(DaVerdict::Match),
                    da_uncertain_pct: pct(DaVerdict::Uncertain),
                });
            }
            for (i, &ka) in cfg.viggo_ks.iter().enumerate() {
                for &kb in &cfg.viggo_ks[i + 1..] {
                    for metric in Metric::ALL {
                        let xs = item_means(of_k(ka), |s| metric.value(s));
                        let ys = item_means(of_k(kb), |s| metric.value(s));
                        significance.push(paired_row(
                            &format!("{format}/{backend}/k={ka}"),
                            &format!("{format}/{backend}/k={kb}"),
                            metric,
                            "pooled",
                            &xs,
                            &ys,
                        ));
                    }
                }
            }
        }
    }
    warnings.extend(manifest.warnings.iter().cloned());
    Ok(ViggoReport {
        manifest_digest: manifest.digest(),
        scorer: env.scorer.scorer_id(),
        test_items: test.len(),
        cells,
        significance,
        failures,
        warnings,
        items: scores,
        manifest,
    })
}

impl ViggoReport {
    pub fn cell(&self, backend: &str, format: PromptFormat, k: usize) -> Option<&ViggoCell> {
        self.cells
            .iter()
            .find(|c| c.backend == backend && c.format == format && c.k == k)
    }

    pub fn render(&self) -> RenderedReport {
        let ks: Vec<usize> = self
            .cells
            .iter()
            .map(|c| c.k)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut md = format!(
            "# Viggo k-shot comparison\n\nManifest: `{}`  \nSurface scorer: `{}`  \nTest items: {}\n\n",
            self.manifest_digest, self.scorer, self.test_items
        );
        md.push_str("| model | format |");
        for k in &ks {
            md.push_str(&format!(" surface k={k} | SA k={k} | DA match % k={k} |"));
        }
        md.push_str("\n|---|---|");
        md.push_str(&"---|".repeat(3 * ks.len()));
        md.push('\n');
        let rows: BTreeSet<(String, PromptFormat)> = self
            .cells
            .iter()
            .map(|c| (c.backend.clone(), c.format))
            .collect();
        for (backend, format) in &rows {
            md.push_str(&format!("| {backend} | {format} |"));
            for &k in &ks {
                let c = self.cell(backend, *format, k);
                let pct = c
                    .and_then(|c| c.da_match_pct)
                    .map_or_else(|| "n/a".into(), |p| format!("{p:.1}"));
                md.push_str(&format!(
                    " {} | {} | {pct} |",
                    fmt2(c.and_then(|c| c.surface)),
                    fmt2(c.and_then(|c| c.semantic_accuracy))
                ));
            }
            md.push('\n');
        }
        if !self.significance.is_empty() {
            md.push_str("\n## Paired t-tests\n\nPairs are matched on the test item.\n\n");
            md.push_str(&significance_markdown(&self.significance));
        }
        if !self.failures.is_empty() {
            md.push_str(&format!("\n## Failures ({})\n\n", self.failures.len()));
            for f in &self.failures {
                md.push_str(&format!("- {f}\n"));
            }
        }
        if !self.warnings.is_empty() {
            md.push_str("\n## Warnings\n\n");
            for w in &self.warnings {
                md.push_str(&format!("- {w}\n"));
            }
        }
        let full = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut tsv = String::from("manifest\tbackend\tformat\tk\tn\tfailed\tsurface\tsemantic_accuracy\tda_match_pct\tda_uncertain_pct\n");
        for c in &self.cells {
            tsv.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                self.manifest_digest,
                c.backend,
                c.format,
                c.k,
                c.n,
                c.failed,
                full(c.surface),
                full(c.semantic_accuracy),
                full(c.da_match_pct),
                full(c.da_uncertain_pct)
            ));
        }
        RenderedReport {
            markdown: md,
            tsv: vec![
                ("cells".into(), tsv),
                ("significance".into(), significance_tsv(&self.significance)),
            ],
            json: serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            manifest: self.manifest.to_json(),
        }
    }
}
