//! Declarative HTTP completion adapters.
//!
//! A backends file is TOML with one table per backend:
//!
//! ```toml
//! [backend.j1-jumbo]
//! endpoint = "https://api.example.com/v1/complete"
//! auth_env = "EXAMPLE_API_KEY"          # optional
//! auth_header = "Authorization"         # default
//! auth_template = "Bearer {key}"        # default
//! prompt_field = "prompt"
//! temperature_field = "temperature"
//! max_tokens_field = "maxTokens"
//! stop_field = "stopSequences"
//! num_candidates_field = "numResults"
//! response_path = "completions[*].data.text"
//! timeout_secs = 60
//! [backend.j1-jumbo.extra]              # static fields merged into the body
//! model = "j1-jumbo"
//! ```
//!
//! Field names left unset are omitted from the request body.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{Backend, BackendError, ClientError, CompletionParams};

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_template() -> String {
    "Bearer {key}".into()
}

fn default_prompt_field() -> String {
    "prompt".into()
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, Deserialize)]
pub struct HttpAdapterConfig {
    pub endpoint: String,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_template")]
    pub auth_template: String,
    #[serde(default = "default_prompt_field")]
    pub prompt_field: String,
    #[serde(default)]
    pub temperature_field: Option<String>,
    #[serde(default)]
    pub max_tokens_field: Option<String>,
    #[serde(default)]
    pub stop_field: Option<String>,
    #[serde(default)]
    pub num_candidates_field: Option<String>,
    pub response_path: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Deserialize)]
struct BackendsFile {
    #[serde(default)]
    backend: BTreeMap<String, HttpAdapterConfig>,
}

pub fn load_backends(path: &Path) -> Result<BTreeMap<String, HttpAdapterConfig>, ClientError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
    parse_backends(&text)
}

pub fn parse_backends(text: &str) -> Result<BTreeMap<String, HttpAdapterConfig>, ClientError> {
    let file: BackendsFile =
        toml::from_str(text).map_err(|e| ClientError::Config(e.to_string()))?;
    Ok(file.backend)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PathStep {
    Key(String),
    Index(usize),
    All,
}

fn parse_path(path: &str) -> Result<Vec<PathStep>, String> {
    let mut steps = Vec::new();
    for part in path.split('.').filter(|p| !p.is_empty()) {
        let (name, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !name.is_empty() {
            steps.push(PathStep::Key(name.to_string()));
        }
        while let Some(stripped) = rest.strip_prefix('[') {
            let end = stripped
                .find(']')
                .ok_or_else(|| format!("unclosed '[' in {path:?}"))?;
            let inner = &stripped[..end];
            steps.push(if inner == "*" {
                PathStep::All
            } else {
                PathStep::Index(
                    inner
                        .parse()
                        .map_err(|_| format!("bad index {inner:?} in {path:?}"))?,
                )
            });
            rest = &stripped[end + 1..];
        }
        if !rest.is_empty() {
            return Err(format!("unexpected {rest:?} in {path:?}"));
        }
    }
    Ok(steps)
}

/// Resolves a dotted path with `[n]` indices and `[*]` wildcards, returning
/// every string it reaches.
pub fn resolve_response_path(value: &Value, path: &str) -> Result<Vec<String>, String> {
    let steps = parse_path(path)?;
    let mut current = vec![value];
    for step in &steps {
        let mut next = Vec::new();
        for v in current {
            match (step, v) {
                (PathStep::Key(k), Value::Object(m)) => next.extend(m.get(k)),
                (PathStep::Index(i), Value::Array(a)) => next.extend(a.get(*i)),
                (PathStep::All, Value::Array(a)) => next.extend(a.iter()),
                _ => {}
            }
        }
        current = next;
    }
    let out: Vec<String> = current
        .into_iter()
        .filter_map(|v| v.as_str().map(str::to_string))
        .collect();
    if out.is_empty() {
        return Err(format!("response path {path:?} matched no strings"));
    }
    Ok(out)
}

pub struct HttpBackend {
    id: String,
    config: HttpAdapterConfig,
    auth_value: Option<String>,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpBackend {
    // The credential is deliberately left out.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("id", &self.id)
            .field("endpoint", &self.config.endpoint)
            .finish()
    }
}

impl HttpBackend {
    /// Reads the credential from the configured environment variable.
    pub fn new(id: &str, config: HttpAdapterConfig) -> Result<Self, ClientError> {
        let auth_value = match &config.auth_env {
            Some(var) => {
                let key = std::env::var(var)
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| ClientError::AuthMissing(var.clone()))?;
                Some(config.auth_template.replace("{key}", &key))
            }
            None => None,
        };
        parse_path(&config.response_path).map_err(ClientError::Config)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpBackend {
            id: id.to_string(),
            config,
            auth_value,
            client,
        })
    }

    pub fn request_body(&self, prompt: &str, params: &CompletionParams) -> Value {
        let c = &self.config;
        let mut body = c.extra.clone();
        body.insert(c.prompt_field.clone(), Value::from(prompt));
        if let Some(f) = &c.temperature_field {
            body.insert(f.clone(), Value::from(params.temperature));
        }
        if let Some(f) = &c.max_tokens_field {
            body.insert(f.clone(), Value::from(params.max_tokens));
        }
        if let Some(f) = &c.stop_field {
            body.insert(f.clone(), Value::from(params.stop_sequences.clone()));
        }
        if let Some(f) = &c.num_candidates_field {
            body.insert(f.clone(), Value::from(params.num_candidates));
        }
        Value::Object(body)
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete_raw(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Vec<String>, BackendError> {
        let mut req = self
            .client
            .post(&self.config.endpoint)
            .json(&self.request_body(prompt, params));
        if let Some(auth) = &self.auth_value {
            req = req.header(self.config.auth_header.as_str(), auth.as_str());
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Transient(format!("request failed: {}", e.without_url())))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            )));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("response is not JSON: {e}")))?;
        resolve_response_path(&value, &self.config.response_path).map_err(BackendError::Fatal)
    }
}
