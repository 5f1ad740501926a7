//! SPARQL triple fetcher with an on-disk cache.
//!
//! Endpoints are either `http(s)://` SPARQL services or `file://<dir>`
//! fixture directories holding one SPARQL JSON result file per property
//! (`<dir>/P57.json`). Cache files live in the configured cache directory
//! and are named `<key>-<date>.json`, where key hashes (relation, limit,
//! endpoint).

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::RealizerError;
use crate::mr::{MrSchema, Triple};
use crate::util::{sha256_hex, write_atomic};

pub const DEFAULT_FETCH_PARALLELISM: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Http(String),
    Fixture(PathBuf),
}

impl Endpoint {
    pub fn parse(text: &str) -> Self {
        match text.strip_prefix("file://") {
            Some(path) => Endpoint::Fixture(PathBuf::from(path)),
            None => Endpoint::Http(text.to_string()),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Endpoint::Http(url) => url.clone(),
            Endpoint::Fixture(dir) => format!("file://{}", dir.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub cache_dir: PathBuf,
    /// Part of the cache key; defaults to today.
    pub date: NaiveDate,
    pub timeout: Duration,
}

impl FetchOptions {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        FetchOptions {
            cache_dir: cache_dir.into(),
            date: chrono::Local::now().date_naive(),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Deserialize)]
struct SparqlResults {
    results: SparqlBindings,
}

#[derive(Debug, Deserialize)]
struct SparqlBindings {
    bindings: Vec<std::collections::HashMap<String, SparqlValue>>,
}

#[derive(Debug, Deserialize)]
struct SparqlValue {
    #[serde(rename = "type")]
    kind: String,
    value: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    relation: String,
    limit: usize,
    endpoint: String,
    date: String,
    triples: Vec<Triple>,
}

pub fn sparql_query(property: &str, limit: usize) -> String {
    format!(
        "SELECT ?s ?sLabel ?o ?oLabel WHERE {{ ?s wdt:{property} ?o . \
         SERVICE wikibase:label {{ bd:serviceParam wikibase:language \"en\". }} }} LIMIT {limit}"
    )
}

fn entity_id(v: &SparqlValue) -> Option<String> {
    (v.kind == "uri").then(|| v.value.rsplit('/').next().unwrap_or(&v.value).to_string())
}

fn parse_results(
    body: &str,
    relation: &str,
    inverse: bool,
    limit: usize,
) -> Result<Vec<Triple>, String> {
    let parsed: SparqlResults = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for b in parsed.results.bindings {
        let (Some(s), Some(o)) = (b.get("s"), b.get("o")) else {
            continue;
        };
        let label = |key: &str, v: &SparqlValue| {
            b.get(key)
                .map(|l| l.value.clone())
                .unwrap_or_else(|| v.value.clone())
        };
        let (mut subj, mut obj) = (
            (label("sLabel", s), entity_id(s)),
            (label("oLabel", o), entity_id(o)),
        );
        if inverse {
            std::mem::swap(&mut subj, &mut obj);
        }
        // Rows with blank labels are skipped rather than failing the batch.
        if let Ok(t) = Triple::new(&subj.0, relation, &obj.0) {
            out.push(t.with_ids(subj.1, obj.1));
        }
        if out.len() == limit {
            break;
        }
    }
    Ok(out)
}

fn cache_prefix(relation: &str, limit: usize, endpoint: &Endpoint) -> String {
    sha256_hex(format!("{relation}\u{1f}{limit}\u{1f}{}", endpoint.id()).as_bytes())[..16]
        .to_string()
}

fn read_cache(path: &Path) -> Option<Vec<Triple>> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str::<CacheFile>(&text)
        .ok()
        .map(|c| c.triples)
}

/// Most recent cache file for the key, by date suffix.
fn latest_cache(dir: &Path, prefix: &str) -> Option<PathBuf> {
    let mut hits: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&format!("{prefix}-")) && n.ends_with(".json"))
        })
        .collect();
    hits.sort();
    hits.pop()
}

fn query_endpoint(
    endpoint: &Endpoint,
    property: &str,
    limit: usize,
    timeout: Duration,
) -> Result<String, RealizerError> {
    match endpoint {
        Endpoint::Fixture(dir) => {
            let path = dir.join(format!("{property}.json"));
            std::fs::read_to_string(&path)
                .map_err(|e| RealizerError::EndpointUnavailable(format!("{}: {e}", path.display())))
        }
        Endpoint::Http(url) => {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .user_agent(concat!("m2t/", env!("CARGO_PKG_VERSION")))
                .build()
                .map_err(|e| RealizerError::EndpointUnavailable(e.to_string()))?;
            let query = sparql_query(property, limit);
            let resp = client
                .get(url)
                .query(&[("query", query.as_str()), ("format", "json")])
                .header("Accept", "application/sparql-results+json")
                .send()
                .map_err(|e| RealizerError::EndpointUnavailable(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(RealizerError::EndpointUnavailable(format!(
                    "{url} returned HTTP {status}"
                )));
            }
            resp.text()
                .map_err(|e| RealizerError::EndpointUnavailable(e.to_string()))
        }
    }
}

/// Fetches up to `limit` triples for a relation. Results are cached per
/// (relation, limit, endpoint, date); when the endpoint is unavailable the
/// most recent cached result for the same (relation, limit, endpoint) is
/// returned instead.
pub fn fetch_triples(
    relation: &str,
    limit: usize,
    endpoint: &Endpoint,
    schema: &MrSchema,
    opts: &FetchOptions,
) -> Result<Vec<Triple>, RealizerError> {
    let spec = schema
        .relation(relation)
        .ok_or_else(|| RealizerError::UnmappedRelation(relation.to_string()))?;
    let prefix = cache_prefix(relation, limit, endpoint);
    let date = opts.date.format("%Y-%m-%d").to_string();
    let cache_path = opts.cache_dir.join(format!("{prefix}-{date}.json"));
    if let Some(triples) = read_cache(&cache_path) {
        return Ok(triples);
    }

    let body = match query_endpoint(endpoint, &spec.property, limit, opts.timeout) {
        Ok(body) => body,
        Err(RealizerError::EndpointUnavailable(reason)) => {
            if let Some(triples) =
                latest_cache(&opts.cache_dir, &prefix).and_then(|p| read_cache(&p))
            {
                log::warn!("endpoint unavailable ({reason}); using cached triples for {relation}");
                return Ok(triples);
            }
            return Err(RealizerError::EndpointUnavailable(reason));
        }
        Err(e) => return Err(e),
    };
    let triples = parse_results(&body, relation, spec.inverse, limit)
        .map_err(|e| RealizerError::EndpointUnavailable(format!("malformed SPARQL result: {e}")))?;

    let cache = CacheFile {
        relation: relation.to_string(),
        limit,
        endpoint: endpoint.id(),
        date,
        triples,
    };
    let bytes = serde_json::to_vec_pretty(&cache).expect("cache serializes");
    write_atomic(&cache_path, &bytes)
        .map_err(|e| RealizerError::Io(format!("{}: {e}", cache_path.display())))?;
    Ok(cache.triples)
}

/// Fetches several relations with at most `parallelism` requests in flight.
/// Results come back in input order.
pub fn fetch_many(
    relations: &[String],
    limit: usize,
    endpoint: &Endpoint,
    schema: &MrSchema,
    opts: &FetchOptions,
    parallelism: usize,
) -> Vec<Result<Vec<Triple>, RealizerError>> {
    let next = Mutex::new(0usize);
    type Slot = Mutex<Option<Result<Vec<Triple>, RealizerError>>>;
    let results: Vec<Slot> = relations.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.max(1).min(relations.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("queue lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(relation) = relations.get(i) else {
                    break;
                };
                let r = fetch_triples(relation, limit, endpoint, schema, opts);
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot")
                .expect("every slot filled")
        })
        .collect()
}
