//! End-to-end experiment designs: the cross-topic matrix, novel-MR
//! generation for human evaluation, Viggo k-shot comparisons and
//! score/label correlation.

mod correlate;
mod matrix;
mod novel;
mod viggo;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::AnnotationError;
use crate::client::{Client, ClientError, GenerationRecord, GenerationStore, MockBackend};
use crate::corpus::CorpusError;
use crate::metrics::{
    dialogue_act_match, paired_t, semantic_accuracy, ChrfScorer, DaVerdict, Lexicon, ScorePair,
    ScorerError, StatsError, SurfaceScorer,
};
use crate::mr::{MeaningRepresentation, MrError, Topic};
use crate::prompt::{PromptError, PromptFormat, QaMarkers};
use crate::util::{sha256_hex, stable_mean, write_atomic};

pub use correlate::{correlate, CorrelationRow, CorrelationTable};
pub use matrix::{run_matrix, Comparison, MatrixReport, Metric, SubTable};
pub use novel::{novel_exemplars, read_novel_mrs, run_novel, NovelMr, NovelRun};
pub use viggo::{run_viggo, ViggoCell, ViggoReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Mr(#[from] MrError),
    #[error("config: {0}")]
    Config(String),
    #[error("no client configured for backend {0:?}")]
    UnknownBackend(String),
    #[error("{path}:{line}: {reason}")]
    Input {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_topics() -> Vec<Topic> {
    Topic::KG_TOPICS.to_vec()
}
fn default_k() -> usize {
    2
}
fn default_viggo_ks() -> Vec<usize> {
    vec![3, 10]
}
fn default_formats() -> Vec<PromptFormat> {
    PromptFormat::ALL.to_vec()
}
fn default_backends() -> Vec<String> {
    vec!["mock".into()]
}
fn default_train_per_topic() -> usize {
    10
}
fn default_test_per_topic() -> usize {
    50
}
fn default_viggo_test_size() -> usize {
    100
}
fn default_one() -> u32 {
    1
}
fn default_temperature() -> f64 {
    crate::client::DEFAULT_TEMPERATURE
}
fn default_max_tokens() -> u32 {
    crate::client::DEFAULT_MAX_TOKENS
}
fn default_parallelism() -> usize {
    4
}
fn default_novel_format() -> PromptFormat {
    PromptFormat::S2s
}

/// Run configuration. Serialized verbatim into every run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kg_corpus: Option<PathBuf>,
    /// Directory with train/valid/test CSVs; the bundled corpus when unset.
    #[serde(default)]
    pub viggo_dir: Option<PathBuf>,
    #[serde(default = "default_topics")]
    pub topics: Vec<Topic>,
    /// Shots per KG prompt.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Shots per dialogue act compared by the Viggo run.
    #[serde(default = "default_viggo_ks")]
    pub viggo_ks: Vec<usize>,
    #[serde(default = "default_formats")]
    pub formats: Vec<PromptFormat>,
    #[serde(default = "default_novel_format")]
    pub novel_format: PromptFormat,
    #[serde(default = "default_backends")]
    pub backends: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_per_topic")]
    pub train_per_topic: usize,
    #[serde(default = "default_test_per_topic")]
    pub test_per_topic: usize,
    #[serde(default)]
    pub viggo_mode: bool,
    #[serde(default = "default_viggo_test_size")]
    pub viggo_test_size: usize,
    #[serde(default = "default_one")]
    pub num_candidates: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Paired tests to run; every pair of sub-tables when empty.
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
    #[serde(default)]
    pub qa_markers: QaMarkers,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    }

    fn check(&self) -> Result<(), ExperimentError> {
        if self.formats.is_empty() || self.backends.is_empty() {
            return Err(ExperimentError::Config(
                "formats and backends must be non-empty".into(),
            ));
        }
        if self.num_candidates == 0 {
            return Err(ExperimentError::Config(
                "num_candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Clients, scorer and lexicon shared by all runs.
pub struct RunEnv {
    pub clients: BTreeMap<String, Client>,
    pub scorer: Box<dyn SurfaceScorer>,
    pub lexicon: Lexicon,
}

impl RunEnv {
    pub fn new(
        clients: BTreeMap<String, Client>,
        scorer: Box<dyn SurfaceScorer>,
        lexicon: Lexicon,
    ) -> Self {
        RunEnv {
            clients,
            scorer,
            lexicon,
        }
    }

    /// A mock client per backend id, sharing `store` when given; chrF
    /// scoring.
    pub fn mock(backends: &[String], store: Option<Arc<GenerationStore>>) -> Self {
        let clients = backends
            .iter()
            .map(|id| {
                let mut c = Client::new(Box::new(MockBackend::new(
                    id,
                    Default::default(),
                    Lexicon::builtin(),
                )));
                if let Some(s) = &store {
                    c = c.with_store(s.clone());
                }
                (id.clone(), c)
            })
            .collect();
        RunEnv::new(clients, Box::new(ChrfScorer), Lexicon::builtin())
    }

    fn client(&self, id: &str) -> Result<&Client, ExperimentError> {
        self.clients
            .get(id)
            .ok_or_else(|| ExperimentError::UnknownBackend(id.into()))
    }
}

/// Order-preserving map over `items` on at most `parallelism` threads.
pub(crate) fn par_map<T: Sync, R: Send>(
    items: &[T],
    parallelism: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..parallelism.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().expect("par_map lock")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("par_map lock")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    /// `<cache_key>#<candidate>`, the key annotations refer to.
    pub item_key: String,
    /// Corpus key of the test item; the pairing key for paired tests.
    pub test_key: String,
    pub backend: String,
    pub format: PromptFormat,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_topic: Option<Topic>,
    /// Test topic (KG) or dialogue act (Viggo).
    pub group: String,
    pub candidate: String,
    pub surface: Option<f64>,
    pub realized: usize,
    pub total: usize,
    pub semantic_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub da_match: Option<DaVerdict>,
}

/// A prompt to send plus what is needed to score its output.
pub(crate) struct Job {
    pub test_key: String,
    pub group: String,
    pub mr: MeaningRepresentation,
    pub reference: Option<String>,
    pub prompt: String,
    pub stops: Vec<String>,
    pub tags: BTreeMap<String, String>,
}

pub(crate) struct JobOutcome {
    pub record: Option<GenerationRecord>,
    pub error: Option<String>,
}

pub(crate) fn run_jobs(client: &Client, cfg: &ExperimentConfig, jobs: &[Job]) -> Vec<JobOutcome> {
    par_map(jobs, cfg.parallelism, |job| {
        let params = crate::client::CompletionParams {
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            stop_sequences: job.stops.clone(),
            num_candidates: cfg.num_candidates,
            backend_id: client.backend_id().to_string(),
        };
        match client.complete_tagged(&job.prompt, &params, &job.tags) {
            Ok(r) => JobOutcome {
                record: Some(r),
                error: None,
            },
            Err(e) => {
                log::warn!("{}: generation failed: {e}", job.test_key);
                JobOutcome {
                    record: None,
                    error: Some(format!("{}: {e}", job.test_key)),
                }
            }
        }
    })
}

/// Scores every candidate of every successful job. Surface scores are
/// requested in one batch; a scorer failure leaves them unset and is
/// reported in the returned warnings.
pub(crate) fn score_outcomes(
    env: &RunEnv,
    jobs: &[Job],
    outcomes: &[JobOutcome],
    base: impl Fn(&Job) -> (String, PromptFormat, usize, Option<Topic>),
) -> (Vec<ItemScore>, Vec<String>) {
    let mut scores = Vec::new();
    let mut pairs = Vec::new();
    for (job, out) in jobs.iter().zip(outcomes) {
        let Some(rec) = &out.record else { continue };
        let (backend, format, k, train_topic) = base(job);
        for (i, cand) in rec.candidates.iter().enumerate() {
            let report = semantic_accuracy(&job.mr, cand, &env.lexicon);
            if let Some(r) = &job.reference {
                pairs.push((
                    scores.len(),
                    ScorePair {
                        candidate: cand.clone(),
                        reference: r.clone(),
                    },
                ));
            }
            scores.push(ItemScore {
                item_key: crate::annotation::item_key(&rec.cache_key, i),
                test_key: job.test_key.clone(),
                backend: backend.clone(),
                format,
                k,
                train_topic,
                group: job.group.clone(),
                candidate: cand.clone(),
                surface: None,
                realized: report.realized,
                total: report.total,
                semantic_accuracy: report.ratio,
                da_match: job.mr.dialogue_act().map(|da| dialogue_act_match(da, cand)),
            });
        }
    }
    let mut warnings = Vec::new();
    if !pairs.is_empty() {
        let batch: Vec<ScorePair> = pairs.iter().map(|(_, p)| p.clone()).collect();
        match env.scorer.score_pairs(&batch) {
            Ok(values) => {
                for ((i, _), v) in pairs.iter().zip(values) {
                    scores[*i].surface = Some(v);
                }
            }
            Err(e) => warnings.push(format!("surface scoring failed: {e}")),
        }
    }
    (scores, warnings)
}

/// Mean over items of the per-item mean over candidates, summed in key
/// order.
pub(crate) fn item_means<'a>(
    scores: impl IntoIterator<Item = &'a ItemScore>,
    value: impl Fn(&ItemScore) -> Option<f64>,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut sorted: Vec<&ItemScore> = scores.into_iter().collect();
    sorted.sort_by(|a, b| (&a.test_key, &a.item_key).cmp(&(&b.test_key, &b.item_key)));
    for s in sorted {
        if let Some(v) = value(s) {
            let e = acc.entry(s.test_key.clone()).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    stable_mean(&values.into_iter().collect::<Vec<_>>())
}

/// Result of one paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    /// "pooled" or a test topic / dialogue act.
    pub scope: String,
    pub n: usize,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub t_statistic: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub(crate) fn paired_row(
    a: &str,
    b: &str,
    metric: Metric,
    scope: &str,
    xs: &BTreeMap<String, f64>,
    ys: &BTreeMap<String, f64>,
) -> SignificanceRow {
    let keys: Vec<&String> = xs.keys().filter(|k| ys.contains_key(*k)).collect();
    let x: Vec<f64> = keys.iter().map(|k| xs[*k]).collect();
    let y: Vec<f64> = keys.iter().map(|k| ys[*k]).collect();
    let mut row = SignificanceRow {
        a: a.into(),
        b: b.into(),
        metric,
        scope: scope.into(),
        n: keys.len(),
        mean_a: mean(x.iter().copied()),
        mean_b: mean(y.iter().copied()),
        t_statistic: None,
        p_value: None,
        note: None,
    };
    match paired_t(&x, &y) {
        Ok(r) => {
            row.t_statistic = r.t_statistic;
            row.p_value = r.p_value;
        }
        Err(StatsError::DegenerateSample { reason, statistic }) => {
            row.t_statistic = statistic;
            row.note = Some(reason);
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

pub(crate) fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

pub(crate) fn fmt_p(v: Option<f64>) -> String {
    v.map_or_else(
        || "n/a".into(),
        |v| {
            if v < 0.001 {
                "<0.001".into()
            } else {
                format!("{v:.3}")
            }
        },
    )
}

pub(crate) fn significance_markdown(rows: &[SignificanceRow]) -> String {
    let mut s = String::from("| a | b | metric | scope | n | mean a | mean b | t | p | note |\n|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.a,
            r.b,
            r.metric.as_str(),
            r.scope,
            r.n,
            fmt2(r.mean_a),
            fmt2(r.mean_b),
            fmt2(r.t_statistic),
            fmt_p(r.p_value),
            r.note.as_deref().unwrap_or("")
        ));
    }
    s
}

pub(crate) fn significance_tsv(rows: &[SignificanceRow]) -> String {
    let mut s = String::from("a\tb\tmetric\tscope\tn\tmean_a\tmean_b\tt\tp\tnote\n");
    let full = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.a,
            r.b,
            r.metric.as_str(),
            r.scope,
            r.n,
            full(r.mean_a),
            full(r.mean_b),
            full(r.t_statistic),
            full(r.p_value),
            r.note.as_deref().unwrap_or("")
        ));
    }
    s
}

/// Everything needed to reproduce a run. Reports quote its digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub kind: String,
    pub config: ExperimentConfig,
    /// Input name to content digest.
    pub inputs: BTreeMap<String, String>,
    pub scorer: Option<String>,
    pub lexicon_version: u32,
    /// Exemplar pools or samples, by name.
    pub exemplars: BTreeMap<String, Vec<String>>,
    /// Exemplar counts per group, by sample name.
    pub exemplar_counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub test_keys: BTreeMap<String, Vec<String>>,
    /// Sorted cache keys of every generation used.
    pub generations: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub(crate) fn new(kind: &str, config: &ExperimentConfig) -> Self {
        RunManifest {
            kind: kind.into(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            scorer: None,
            lexicon_version: 1,
            exemplars: BTreeMap::new(),
            exemplar_counts: BTreeMap::new(),
            test_keys: BTreeMap::new(),
            generations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub(crate) fn set_generations<'a>(
        &mut self,
        outcomes: impl IntoIterator<Item = &'a JobOutcome>,
    ) {
        let keys: BTreeSet<String> = outcomes
            .into_iter()
            .filter_map(|o| o.record.as_ref().map(|r| r.cache_key.clone()))
            .collect();
        self.generations = keys.into_iter().collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

/// A rendered report set: Markdown, TSV and JSON plus the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub markdown: String,
    /// Named delimited tables.
    pub tsv: Vec<(String, String)>,
    pub json: String,
    pub manifest: String,
}

impl RenderedReport {
    /// Writes `<stem>.md`, `<stem>.<table>.tsv`, `<stem>.json` and
    /// `<stem>.manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
        let mut files = vec![
            (format!("{stem}.md"), &self.markdown),
            (format!("{stem}.json"), &self.json),
            (format!("{stem}.manifest.json"), &self.manifest),
        ];
        files.extend(
            self.tsv
                .iter()
                .map(|(name, body)| (format!("{stem}.{name}.tsv"), body)),
        );
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            write_atomic(&path, body.as_bytes())?;
            out.push(path);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(
            (c.train_per_topic, c.test_per_topic, c.viggo_test_size, c.k),
            (10, 50, 100, 2)
        );
        assert_eq!(c.topics.len(), 4);
        assert_eq!(c.viggo_ks, [3, 10]);
        assert_eq!(c.temperature, 0.7);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(toml::from_str::<ExperimentConfig>("tpoics = []").is_err());
        let c: ExperimentConfig =
            toml::from_str("topics = [\"tv\"]\nformats = [\"qa\"]\nseed = 7").unwrap();
        assert_eq!(
            (c.topics, c.formats, c.seed),
            (vec![Topic::Tv], vec![PromptFormat::Qa], 7)
        );
    }

    #[test]
    fn par_map_preserves_order() {
        let v: Vec<u64> = (0..100).collect();
        assert_eq!(
            par_map(&v, 7, |x| x * 2),
            v.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
        assert!(par_map(&Vec::<u8>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn paired_rows_report_degenerate_samples() {
        let xs: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 2.0)].into();
        let row = paired_row("x", "y", Metric::Surface, "pooled", &xs, &xs);
        assert_eq!((row.n, row.t_statistic), (2, Some(0.0)));
        assert!(row.note.is_some());
    }
}
