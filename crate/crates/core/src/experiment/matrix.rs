use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    fmt2, item_means, mean, paired_row, run_jobs, score_outcomes, significance_markdown,
    significance_tsv, ExperimentConfig, ExperimentError, ItemScore, Job, RenderedReport, RunEnv,
    RunManifest, SignificanceRow,
};
use crate::corpus::{kg_corpus_to_string, CorpusItem, KgRecord, Split};
use crate::mr::Topic;
use crate::prompt::{build, sample_exemplars, Exemplar, PromptFormat, SamplingStrategy};
use crate::util::{derive_seed, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Surface,
    SemanticAccuracy,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Surface, Metric::SemanticAccuracy];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Surface => "surface",
            Metric::SemanticAccuracy => "semantic_accuracy",
        }
    }

    pub(crate) fn value(self, s: &ItemScore) -> Option<f64> {
        match self {
            Metric::Surface => s.surface,
            Metric::SemanticAccuracy => Some(s.semantic_accuracy),
        }
    }
}

/// A paired test between two selections, each written
/// `format/backend` (a whole sub-table) or `format/backend/train_topic`
/// (one row). Both sides must be of the same kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Both metrics when unset.
    #[serde(default)]
    pub metric: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq)]
struct Selector {
    format: PromptFormat,
    backend: String,
    train_topic: Option<Topic>,
}

impl Selector {
    fn parse(s: &str) -> Result<Self, ExperimentError> {
        let parts: Vec<&str> = s.split('/').collect();
        let bad = || ExperimentError::Config(format!("bad comparison selector {s:?}"));
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        Ok(Selector {
            format: parts[0].parse().map_err(|_| bad())?,
            backend: parts[1].to_string(),
            train_topic: parts
                .get(2)
                .map(|t| t.parse())
                .transpose()
                .map_err(|_| bad())?,
        })
    }

    fn select<'a>(&self, scores: &'a [ItemScore]) -> Vec<&'a ItemScore> {
        scores
            .iter()
            .filter(|s| {
                s.format == self.format
                    && s.backend == self.backend
                    && self.train_topic.is_none_or(|t| s.train_topic == Some(t))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub value: Option<f64>,
    /// Test items with at least one scored candidate.
    pub n: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubTable {
    pub format: PromptFormat,
    pub backend: String,
    pub metric: Metric,
    pub topics: Vec<Topic>,
    /// `cells[train][test]`.
    pub cells: Vec<Vec<Cell>>,
    pub row_avg: Vec<Option<f64>>,
    pub col_avg: Vec<Option<f64>>,
    pub overall: Option<f64>,
}

impl SubTable {
    pub fn cell(&self, train: Topic, test: Topic) -> Option<&Cell> {
        let i = self.topics.iter().position(|t| *t == train)?;
        let j = self.topics.iter().position(|t| *t == test)?;
        Some(&self.cells[i][j])
    }

    pub fn diagonal(&self) -> Vec<Option<f64>> {
        (0..self.topics.len())
            .map(|i| self.cells[i][i].value)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub manifest_digest: String,
    pub scorer: String,
    pub test_items: BTreeMap<Topic, usize>,
    pub subtables: Vec<SubTable>,
    pub significance: Vec<SignificanceRow>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub items: Vec<ItemScore>,
    #[serde(skip)]
    pub manifest: RunManifest,
}

/// The `n` records with the lowest seeded rank, returned in key order.
fn pick<'a>(mut pool: Vec<&'a KgRecord>, n: usize, seed: u64, salt: &str) -> Vec<&'a KgRecord> {
    pool.sort_by_cached_key(|r| {
        (
            derive_seed(seed, &format!("{salt}|{}", r.key())),
            r.key().to_string(),
        )
    });
    pool.truncate(n);
    pool.sort_by(|a, b| a.key().cmp(b.key()));
    pool
}

/// Train-topic × test-topic evaluation for every (format, backend).
///
/// Each topic contributes `train_per_topic` training records (its exemplar
/// pool) and `test_per_topic` test records. Every test item is prompted with
/// `k` exemplars drawn from the train topic's pool, seeded by the item key,
/// so results do not depend on item order.
pub fn run_matrix(
    cfg: &ExperimentConfig,
    corpus: &[KgRecord],
    env: &RunEnv,
) -> Result<MatrixReport, ExperimentError> {
    cfg.check()?;
    let mut manifest = RunManifest::new("matrix", cfg);
    let mut sorted: Vec<KgRecord> = corpus.to_vec();
    sorted.sort_by(|a, b| a.key().cmp(b.key()));
    manifest.inputs.insert(
        "kg_corpus".into(),
        sha256_hex(kg_corpus_to_string(&sorted).as_bytes()),
    );
    manifest.scorer = Some(env.scorer.scorer_id());

    let mut pools: BTreeMap<Topic, Vec<&KgRecord>> = BTreeMap::new();
    let mut tests: BTreeMap<Topic, Vec<&KgRecord>> = BTreeMap::new();
    for &topic in &cfg.topics {
        let of = |split: Split| {
            sorted
                .iter()
                .filter(|r| r.topic == topic && r.split == split)
                .collect::<Vec<_>>()
        };
        let pool = pick(of(Split::Train), cfg.train_per_topic, cfg.seed, "train");
        let test = pick(of(Split::Test), cfg.test_per_topic, cfg.seed, "test");
        if pool.len() < cfg.train_per_topic {
            manifest.warnings.push(format!(
                "{topic}: {} training records, wanted {}",
                pool.len(),
                cfg.train_per_topic
            ));
        }
        if test.len() < cfg.test_per_topic {
            manifest.warnings.push(format!(
                "{topic}: {} test records, wanted {}",
                test.len(),
                cfg.test_per_topic
            ));
        }
        manifest.exemplars.insert(
            format!("pool:{topic}"),
            pool.iter().map(|r| r.key().to_string()).collect(),
        );
        manifest.test_keys.insert(
            topic.to_string(),
            test.iter().map(|r| r.key().to_string()).collect(),
        );
        pools.insert(topic, pool);
        tests.insert(topic, test);
    }
    let test_keys: BTreeSet<String> = tests
        .values()
        .flatten()
        .map(|r| r.key().to_string())
        .collect();

    let mut scores = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let mut all_outcomes = Vec::new();
    let mut attempted: BTreeMap<(PromptFormat, String, Topic, Topic), (usize, usize)> =
        BTreeMap::new();
    for &format in &cfg.formats {
        for backend in &cfg.backends {
            let client = env.client(backend)?;
            for &train in &cfg.topics {
                let pool: Vec<KgRecord> = pools[&train].iter().map(|r| (*r).clone()).collect();
                let mut jobs = Vec::new();
                for &test in &cfg.topics {
                    for item in &tests[&test] {
                        let seed = derive_seed(cfg.seed, &format!("{train}|{}", item.key()));
                        let sample = sample_exemplars(
                            &pool,
                            cfg.k,
                            SamplingStrategy::Uniform,
                            seed,
                            &test_keys,
                        )?;
                        let exemplars = sample
                            .items
                            .iter()
                            .map(|r| Exemplar::from_item(*r))
                            .collect::<Result<Vec<_>, _>>()?;
                        let mr = item.mr();
                        let bundle =
                            build(format, &exemplars, &mr.to_prompt_line()?, &cfg.qa_markers)?;
                        let tags = BTreeMap::from([
                            ("format".to_string(), format.to_string()),
                            ("model".to_string(), backend.clone()),
                            ("topic".to_string(), test.to_string()),
                            ("train_topic".to_string(), train.to_string()),
                        ]);
                        jobs.push(Job {
                            test_key: item.key().to_string(),
                            group: test.to_string(),
                            mr,
                            reference: Some(item.reference.clone()),
                            prompt: bundle.rendered,
                            stops: bundle.stop_sequences,
                            tags,
                        });
                    }
                }
                let outcomes = run_jobs(client, cfg, &jobs);
                for (job, out) in jobs.iter().zip(&outcomes) {
                    let test: Topic = job.group.parse()?;
                    let e = attempted
                        .entry((format, backend.clone(), train, test))
                        .or_default();
                    e.0 += 1;
                    if let Some(err) = &out.error {
                        e.1 += 1;
                        failures.push(format!("{format}/{backend}/{train}: {err}"));
                    }
                }
                let (s, w) = score_outcomes(env, &jobs, &outcomes, |_| {
                    (backend.clone(), format, cfg.k, Some(train))
                });
                scores.extend(s);
                warnings.extend(w);
                all_outcomes.extend(outcomes);
            }
        }
    }
    manifest.set_generations(&all_outcomes);
    scores.sort_by(|a, b| {
        (
            a.format,
            &a.backend,
            a.train_topic,
            &a.group,
            &a.test_key,
            &a.item_key,
        )
            .cmp(&(
                b.format,
                &b.backend,
                b.train_topic,
                &b.group,
                &b.test_key,
                &b.item_key,
            ))
    });

    let mut subtables = Vec::new();
    for &format in &cfg.formats {
        for backend in &cfg.backends {
            for metric in Metric::ALL {
                subtables.push(subtable(cfg, format, backend, metric, &scores, &attempted));
            }
        }
    }

    let comparisons = if cfg.comparisons.is_empty() {
        default_comparisons(cfg)
    } else {
        cfg.comparisons.clone()
    };
    let mut significance = Vec::new();
    for c in &comparisons {
        significance.extend(compare(c, &cfg.topics, &scores)?);
    }

    warnings.extend(manifest.warnings.iter().cloned());
    let manifest_digest = manifest.digest();
    Ok(MatrixReport {
        manifest_digest,
        scorer: env.scorer.scorer_id(),
        test_items: tests.iter().map(|(t, v)| (*t, v.len())).collect(),
        subtables,
        significance,
        failures,
        warnings,
        items: scores,
        manifest,
    })
}

fn subtable(
    cfg: &ExperimentConfig,
    format: PromptFormat,
    backend: &str,
    metric: Metric,
    scores: &[ItemScore],
    attempted: &BTreeMap<(PromptFormat, String, Topic, Topic), (usize, usize)>,
) -> SubTable {
    let topics = cfg.topics.clone();
    let cells: Vec<Vec<Cell>> = topics
        .iter()
        .map(|&train| {
            topics
                .iter()
                .map(|&test| {
                    let test_name = test.to_string();
                    let sel = scores.iter().filter(|s| {
                        s.format == format
                            && s.backend == backend
                            && s.train_topic == Some(train)
                            && s.group == test_name
                    });
                    let means = item_means(sel, |s| metric.value(s));
                    let (_, failed) = attempted
                        .get(&(format, backend.to_string(), train, test))
                        .copied()
                        .unwrap_or_default();
                    Cell {
                        value: mean(means.values().copied()),
                        n: means.len(),
                        failed,
                    }
                })
                .collect()
        })
        .collect();
    let row_avg = cells
        .iter()
        .map(|row| mean(row.iter().filter_map(|c| c.value)))
        .collect::<Vec<_>>();
    let col_avg = (0..topics.len())
        .map(|j| mean(cells.iter().filter_map(|row| row[j].value)))
        .collect::<Vec<_>>();
    let overall = mean(cells.iter().flatten().filter_map(|c| c.value));
    SubTable {
        format,
        backend: backend.to_string(),
        metric,
        topics,
        cells,
        row_avg,
        col_avg,
        overall,
    }
}

fn default_comparisons(cfg: &ExperimentConfig) -> Vec<Comparison> {
    let tables: Vec<String> = cfg
        .formats
        .iter()
        .flat_map(|f| cfg.backends.iter().map(move |b| format!("{f}/{b}")))
        .collect();
    let mut out = Vec::new();
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            out.push(Comparison {
                a: tables[i].clone(),
                b: tables[j].clone(),
                metric: None,
            });
        }
    }
    out
}

/// Pooled over all test topics, then per test topic.
fn compare(
    c: &Comparison,
    topics: &[Topic],
    scores: &[ItemScore],
) -> Result<Vec<SignificanceRow>, ExperimentError> {
    let a = Selector::parse(&c.a)?;
    let b = Selector::parse(&c.b)?;
    if a.train_topic.is_some() != b.train_topic.is_some() {
        return Err(ExperimentError::Config(format!(
            "cannot pair a row with a sub-table: {} vs {}",
            c.a, c.b
        )));
    }
    let metrics: Vec<Metric> = c.metric.map_or_else(|| Metric::ALL.to_vec(), |m| vec![m]);
    let mut rows = Vec::new();
    for metric in metrics {
        // Rows pair on the test item alone; sub-tables also on the train topic.
        let values = |sel: &Selector, scope: Option<&str>| -> BTreeMap<String, f64> {
            let chosen: Vec<ItemScore> = sel
                .select(scores)
                .into_iter()
                .filter(|s| scope.is_none_or(|g| s.group == g))
                .map(|s| {
                    let mut s = s.clone();
                    if sel.train_topic.is_none() {
                        s.test_key = format!(
                            "{}|{}",
                            s.train_topic.map(|t| t.as_str()).unwrap_or(""),
                            s.test_key
                        );
                    }
                    s
                })
                .collect();
            item_means(&chosen, |s| metric.value(s))
        };
        rows.push(paired_row(
            &c.a,
            &c.b,
            metric,
            "pooled",
            &values(&a, None),
            &values(&b, None),
        ));
        for t in topics {
            let scope = t.to_string();
            rows.push(paired_row(
                &c.a,
                &c.b,
                metric,
                &scope,
                &values(&a, Some(&scope)),
                &values(&b, Some(&scope)),
            ));
        }
    }
    Ok(rows)
}

impl MatrixReport {
    pub fn render(&self) -> RenderedReport {
        let mut md = String::from("# Cross-topic matrix\n\n");
        md.push_str(&format!(
            "Manifest: `{}`  \nSurface scorer: `{}`\n\n",
            self.manifest_digest, self.scorer
        ));
        let items: Vec<String> = self
            .test_items
            .iter()
            .map(|(t, n)| format!("{t} {n}"))
            .collect();
        md.push_str(&format!(
            "Test items per topic: {} (total {}). Rows are the exemplar (train) topic, columns the test topic. \
             `*` marks within-domain cells; `n/a` marks cells with no scored output.\n",
            items.join(", "),
            self.test_items.values().sum::<usize>()
        ));
        for t in &self.subtables {
            md.push_str(&format!(
                "\n## {} / {}: {}\n\n",
                t.format,
                t.backend,
                t.metric.as_str()
            ));
            md.push_str("| train \\ test |");
            for topic in &t.topics {
                md.push_str(&format!(" {topic} |"));
            }
            md.push_str(" avg |\n|---|");
            md.push_str(&"---|".repeat(t.topics.len() + 1));
            md.push('\n');
            for (i, train) in t.topics.iter().enumerate() {
                md.push_str(&format!("| {train} |"));
                for (j, c) in t.cells[i].iter().enumerate() {
                    let mark = if i == j { "*" } else { "" };
                    md.push_str(&format!(" {}{mark} |", fmt2(c.value)));
                }
                md.push_str(&format!(" {} |\n", fmt2(t.row_avg[i])));
            }
            md.push_str("| avg |");
            for v in &t.col_avg {
                md.push_str(&format!(" {} |", fmt2(*v)));
            }
            md.push_str(&format!(" {} |\n", fmt2(t.overall)));
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

        let mut cells = String::from(
            "manifest\tformat\tbackend\tmetric\ttrain\ttest\twithin_domain\tn\tfailed\tvalue\n",
        );
        let full = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for t in &self.subtables {
            for (i, train) in t.topics.iter().enumerate() {
                for (j, test) in t.topics.iter().enumerate() {
                    let c = &t.cells[i][j];
                    cells.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{train}\t{test}\t{}\t{}\t{}\t{}\n",
                        self.manifest_digest,
                        t.format,
                        t.backend,
                        t.metric.as_str(),
                        i == j,
                        c.n,
                        c.failed,
                        full(c.value)
                    ));
                }
                cells.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{train}\tavg\tfalse\t\t\t{}\n",
                    self.manifest_digest,
                    t.format,
                    t.backend,
                    t.metric.as_str(),
                    full(t.row_avg[i])
                ));
            }
            for (j, test) in t.topics.iter().enumerate() {
                cells.push_str(&format!(
                    "{}\t{}\t{}\t{}\tavg\t{test}\tfalse\t\t\t{}\n",
                    self.manifest_digest,
                    t.format,
                    t.backend,
                    t.metric.as_str(),
                    full(t.col_avg[j])
                ));
            }
        }
        RenderedReport {
            markdown: md,
            tsv: vec![
                ("cells".into(), cells),
                ("significance".into(), significance_tsv(&self.significance)),
            ],
            json: serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            manifest: self.manifest.to_json(),
        }
    }
}
