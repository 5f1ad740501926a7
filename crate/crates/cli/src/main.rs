use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use m2t::annotation::{self, AnnotationStore, GroupBy, ItemFilter};
use m2t::client::{self, Client, GenerationStore, HttpBackend, MockBackend, RateLimiter};
use m2t::corpus::{self, CorpusItem};
use m2t::experiment::{self, ExperimentConfig, ItemScore, RunEnv};
use m2t::metrics::{ChrfScorer, Lexicon, RemoteScorer, SurfaceScorer};
use m2t::mr::MrSchema;
use m2t::realizer::{
    self, CorpusSplitConfig, Endpoint, FetchOptions, FileTripleSource, SyntheticSource,
    TemplateBank, TripleSource,
};

#[derive(Parser)]
#[command(
    name = "m2t",
    version,
    about = "Meaning-to-text generation and evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct BackendArgs {
    /// TOML file with `[backend.<id>]` HTTP adapter tables. Ids not listed
    /// there that start with "mock" use the offline mock backend.
    #[arg(long)]
    backends: Option<PathBuf>,
    /// Generation store (JSON lines); defaults to <out>/generations.jsonl.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Maximum backend requests per second.
    #[arg(long)]
    rate_limit: Option<usize>,
    /// Maximum backend requests for the whole run.
    #[arg(long)]
    budget: Option<u64>,
    /// Retry attempts on transient backend failures.
    #[arg(long, default_value_t = 5)]
    retries: u32,
    /// Base URL of a remote surface scorer; chrF is used when unset.
    #[arg(long)]
    scorer_url: Option<String>,
    /// Parallel requests per backend (overrides the config).
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a templated KG corpus from fetched or synthetic triples.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Triple TSV (topic, subject, relation, object, subject_id, object_id).
        #[arg(long, conflicts_with = "synthetic")]
        triples: Option<PathBuf>,
        /// Synthetic triple groups per template category.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 10)]
        test_per_category: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fetch triples for relations from a SPARQL endpoint into a TSV file.
    Fetch {
        /// Comma-separated relation names; every schema relation when unset.
        #[arg(long, value_delimiter = ',')]
        relations: Vec<String>,
        #[arg(long, default_value_t = 100)]
        limit: usize,
        /// Endpoint URL, or file://<dir> for recorded responses.
        #[arg(long, default_value = "https://query.wikidata.org/sparql")]
        endpoint: String,
        #[arg(long, default_value = ".m2t-cache/sparql")]
        cache: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = realizer::DEFAULT_FETCH_PARALLELISM)]
        parallelism: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate a corpus and print per-split statistics.
    Corpus {
        /// Viggo directory with train/valid/test CSVs.
        #[arg(long, conflicts_with = "kg")]
        viggo: Option<PathBuf>,
        /// KG corpus file (JSON lines).
        #[arg(long)]
        kg: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Train-topic × test-topic matrix over a KG corpus (the Viggo run when
    /// the config sets viggo_mode).
    Matrix {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Generate outputs for novel MRs and package them for labeling.
    Novel {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `id<TAB>topic<TAB>mr` lines; the bundled sample set when unset.
        #[arg(long)]
        mrs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// k-shot comparison on the Viggo corpus.
    Viggo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        viggo_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Label stored generations interactively.
    Annotate {
        /// Generation store to label.
        #[arg(long)]
        store: PathBuf,
        /// Annotation store; defaults to annotations.jsonl next to the generation store.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Package file of items (as written by `novel`); overrides the generation store's items.
        #[arg(long)]
        package: Option<PathBuf>,
        #[arg(long)]
        rater: String,
        /// Comma-separated `field=value` terms over topic, model, da and key.
        #[arg(long, default_value = "")]
        filter: String,
    },
    /// Aggregate human labels.
    Report {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "topic")]
        group_by: GroupBy,
        /// Write report.md and report.tsv here as well as printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlate automatic surface scores with human labels.
    Correlate {
        /// A matrix or viggo report JSON file.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            out,
            triples,
            synthetic,
            templates,
            train,
            dev,
            test_per_category,
            seed,
        } => {
            let bank = match templates {
                Some(p) => TemplateBank::load(&p)?,
                None => TemplateBank::builtin(),
            };
            let source: Box<dyn TripleSource> = match (triples, synthetic) {
                (Some(p), _) => Box::new(FileTripleSource::load(&p)?),
                (None, Some(n)) => Box::new(SyntheticSource::new(n)),
                (None, None) => bail!("pass --triples <file> or --synthetic <n>"),
            };
            let cfg = CorpusSplitConfig {
                train_target: train,
                dev_target: dev,
                test_per_category,
                seed,
            };
            let generated = realizer::generate_corpus(source.as_ref(), &bank, cfg)?;
            generated.write(&out)?;
            for w in &generated.manifest.warnings {
                log::warn!("{w}");
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&generated.manifest.totals)?
            );
            println!("wrote {}", out.join("corpus.jsonl").display());
        }
        Command::Fetch {
            relations,
            limit,
            endpoint,
            cache,
            schema,
            parallelism,
            out,
        } => {
            let schema = load_schema(schema.as_deref())?;
            let relations: Vec<String> = if relations.is_empty() {
                let mut all: Vec<String> =
                    schema.relations().iter().map(|r| r.name.clone()).collect();
                all.sort();
                all.dedup();
                all
            } else {
                relations
            };
            let endpoint = Endpoint::parse(&endpoint);
            let opts = FetchOptions::new(cache);
            let results =
                realizer::fetch_many(&relations, limit, &endpoint, &schema, &opts, parallelism);
            let mut tsv = String::new();
            for (relation, result) in relations.iter().zip(results) {
                let triples = result.with_context(|| format!("fetching {relation}"))?;
                let topic = schema
                    .relation(relation)
                    .map(|r| r.topic.to_string())
                    .unwrap_or_default();
                for t in &triples {
                    tsv.push_str(&format!(
                        "{topic}\t{}\t{}\t{}\t{}\t{}\n",
                        t.subject(),
                        t.relation(),
                        t.object(),
                        t.subject_id().unwrap_or(""),
                        t.object_id().unwrap_or("")
                    ));
                }
                println!("{relation}: {} triples", triples.len());
            }
            std::fs::write(&out, tsv).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Corpus { viggo, kg, schema } => {
            if let Some(path) = kg {
                let records = corpus::read_kg_corpus(&path)?;
                let mut counts: BTreeMap<(String, &str), usize> = BTreeMap::new();
                for r in &records {
                    r.parse_mr()
                        .with_context(|| format!("record {}", r.key()))?;
                    *counts
                        .entry((r.topic.to_string(), r.split.as_str()))
                        .or_default() += 1;
                }
                println!("topic\tsplit\trecords");
                for ((topic, split), n) in counts {
                    println!("{topic}\t{split}\t{n}");
                }
            } else {
                let dir = viggo.unwrap_or_else(corpus::bundled_viggo_dir);
                let schema = load_schema(schema.as_deref())?;
                let records = corpus::read_viggo_dir(&dir, Some(&schema))?;
                let mut counts: BTreeMap<(&str, String), usize> = BTreeMap::new();
                for r in &records {
                    *counts
                        .entry((r.split.as_str(), r.mr.dialogue_act().to_string()))
                        .or_default() += 1;
                }
                println!("split\tdialogue_act\trecords");
                for ((split, da), n) in counts {
                    println!("{split}\t{da}\t{n}");
                }
            }
        }
        Command::Matrix {
            config,
            corpus,
            out,
            backend,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = corpus {
                cfg.kg_corpus = Some(p);
            }
            if let Some(p) = backend.parallelism {
                cfg.parallelism = p;
            }
            if cfg.viggo_mode {
                return viggo_run(&cfg, &backend, &out);
            }
            let path = cfg
                .kg_corpus
                .clone()
                .context("no KG corpus: pass --corpus or set kg_corpus in the config")?;
            let records = corpus::read_kg_corpus(&path)?;
            let env = build_env(&cfg, &backend, &out)?;
            let report = experiment::run_matrix(&cfg, &records, &env)?;
            let files = report.render().write(&out, "matrix")?;
            summarize_run(&files, report.failures.len());
        }
        Command::Novel {
            config,
            mrs,
            out,
            backend,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = backend.parallelism {
                cfg.parallelism = p;
            }
            let path = mrs.unwrap_or_else(|| {
                Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/novel_mrs.tsv")
            });
            let mrs = experiment::read_novel_mrs(&path)?;
            let env = build_env(&cfg, &backend, &out)?;
            let run = experiment::run_novel(&cfg, &mrs, &env)?;
            let package = out.join("package.jsonl");
            std::fs::create_dir_all(&out)?;
            std::fs::write(&package, run.package_jsonl())?;
            let files = run.render(&[])?.write(&out, "novel")?;
            println!(
                "packaged {} items in {}",
                run.package.len(),
                package.display()
            );
            summarize_run(&files, run.failures.len());
        }
        Command::Viggo {
            config,
            viggo_dir,
            out,
            backend,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(d) = viggo_dir {
                cfg.viggo_dir = Some(d);
            }
            if let Some(p) = backend.parallelism {
                cfg.parallelism = p;
            }
            viggo_run(&cfg, &backend, &out)?;
        }
        Command::Annotate {
            store,
            labels,
            package,
            rater,
            filter,
        } => {
            let items = match package {
                Some(p) => read_package(&p)?,
                None => {
                    if !store.exists() {
                        return Err(annotation::AnnotationError::StoreMissing(store).into());
                    }
                    let generations = GenerationStore::open(&store)?;
                    annotation::items_from_generations(&generations.records())
                }
            };
            let labels = labels.unwrap_or_else(|| store.with_file_name("annotations.jsonl"));
            let mut ann = AnnotationStore::open(&labels)?;
            let filter = ItemFilter::parse(&filter)?;
            let stdin = std::io::stdin();
            let mut input = stdin.lock();
            let mut output = std::io::stdout();
            writeln!(output, "Coherence: 3 makes sense and is natural, 2 understandable but flawed, 1 incoherent.")?;
            let n =
                annotation::annotate(&items, &mut ann, &filter, &rater, &mut input, &mut output)?;
            println!("\n{n} record(s) appended to {}", labels.display());
        }
        Command::Report {
            labels,
            group_by,
            out,
        } => {
            let records = annotation::read_records(&labels)?;
            let table = annotation::aggregate(&records, group_by)?;
            print!("{}", table.to_markdown());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("report.md"), table.to_markdown())?;
                std::fs::write(dir.join("report.tsv"), table.to_tsv())?;
            }
        }
        Command::Correlate {
            report,
            labels,
            out,
        } => {
            let text = std::fs::read_to_string(&report)
                .with_context(|| format!("reading {}", report.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let items: Vec<ItemScore> = serde_json::from_value(
                value
                    .get("items")
                    .cloned()
                    .context("report has no items array")?,
            )?;
            let records = annotation::read_records(&labels)?;
            let table = experiment::correlate(&items, &records)?;
            print!("{}", table.to_markdown());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("correlation.md"), table.to_markdown())?;
                std::fs::write(dir.join("correlation.tsv"), table.to_tsv())?;
            }
        }
    }
    Ok(())
}

fn load_schema(path: Option<&Path>) -> Result<MrSchema> {
    Ok(match path {
        Some(p) => MrSchema::load(p)?,
        None => MrSchema::builtin(),
    })
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

fn read_package(path: &Path) -> Result<Vec<annotation::AnnotationItem>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut items = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(items)
}

fn viggo_run(cfg: &ExperimentConfig, backend: &BackendArgs, out: &Path) -> Result<()> {
    let dir = cfg
        .viggo_dir
        .clone()
        .unwrap_or_else(corpus::bundled_viggo_dir);
    let records = corpus::read_viggo_dir(&dir, None)?;
    let env = build_env(cfg, backend, out)?;
    let report = experiment::run_viggo(cfg, &records, &env)?;
    let files = report.render().write(out, "viggo")?;
    summarize_run(&files, report.failures.len());
    Ok(())
}

fn build_env(cfg: &ExperimentConfig, args: &BackendArgs, out: &Path) -> Result<RunEnv> {
    let adapters = match &args.backends {
        Some(p) => client::load_backends(p)?,
        None => BTreeMap::new(),
    };
    let store_path = args
        .store
        .clone()
        .unwrap_or_else(|| out.join("generations.jsonl"));
    let store = Arc::new(GenerationStore::open(&store_path)?);
    let mut clients = BTreeMap::new();
    for id in &cfg.backends {
        let backend: Box<dyn client::Backend> = match adapters.get(id) {
            Some(adapter) => Box::new(HttpBackend::new(id, adapter.clone())?),
            None if id.starts_with("mock") => Box::new(
                MockBackend::new(id, TemplateBank::builtin(), Lexicon::builtin())
                    .with_markers(cfg.qa_markers.clone()),
            ),
            None => bail!("backend {id:?} is not defined in the backends file"),
        };
        let retry = client::RetryPolicy {
            max_attempts: args.retries.max(1),
            ..Default::default()
        };
        let mut c = Client::new(backend)
            .with_store(store.clone())
            .with_retry(retry)
            .with_markers(cfg.qa_markers.clone());
        if let Some(r) = args.rate_limit {
            c = c.with_rate_limit(RateLimiter::per_second(r));
        }
        if let Some(b) = args.budget {
            c = c.with_budget(b);
        }
        clients.insert(id.clone(), c);
    }
    let scorer: Box<dyn SurfaceScorer> = match &args.scorer_url {
        Some(url) => Box::new(RemoteScorer::new(url, Duration::from_secs(60))?),
        None => Box::new(ChrfScorer),
    };
    Ok(RunEnv::new(clients, scorer, Lexicon::builtin()))
}

fn summarize_run(files: &[PathBuf], failures: usize) {
    for f in files {
        println!("wrote {}", f.display());
    }
    if failures > 0 {
        log::warn!("{failures} generation(s) failed; affected cells are partial");
    }
}
