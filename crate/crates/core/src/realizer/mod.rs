//! Template realization of KG MRs and synthetic corpus generation.

mod fetch;
mod generate;
mod source;
mod template;

use thiserror::Error;

pub use fetch::{
    fetch_many, fetch_triples, sparql_query, Endpoint, FetchOptions, DEFAULT_FETCH_PARALLELISM,
};
pub use generate::{generate_corpus, CorpusManifest, CorpusSplitConfig, GeneratedCorpus};
pub use source::{FileTripleSource, SyntheticSource, TripleSource};
pub use template::{realize, realize_in_group, Template, TemplateBank};

#[derive(Debug, Error)]
pub enum RealizerError {
    #[error("no template for relation signature {signature:?}")]
    NoTemplateForSignature { signature: Vec<String> },
    #[error("template {id}: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("malformed template bank: {0}")]
    BankFormat(String),
    #[error("{source_name}:{line}: {reason}")]
    SourceFormat {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("relation {0:?} has no property mapping in the schema")]
    UnmappedRelation(String),
    #[error("endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("i/o error: {0}")]
    Io(String),
}
