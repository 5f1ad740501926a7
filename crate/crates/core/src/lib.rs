//! Meaning-to-text (M2T) generation toolkit.
//!
//! The crate covers the whole few-shot experimentation loop for two families
//! of meaning representations: knowledge-graph triple sets and Viggo-style
//! dialogue acts.
//!
//! - [`mr`]: domain types, parsers and canonical serializations.
//! - [`realizer`]: template bank, template realization, synthetic corpus
//!   generation and the WikiData triple fetcher.
//! - [`prompt`]: few-shot prompt assembly (S2S and QA layouts) and exemplar
//!   sampling.
//! - [`client`]: completion backends (HTTP adapters and an offline mock) with
//!   caching, retries, rate limiting and an append-only generation store.
//! - [`metrics`]: slot alignment, dialogue-act checks, question detection,
//!   character n-gram similarity, remote scorers and statistics.
//! - [`annotation`]: human label capture, validation and aggregation.
//! - [`experiment`]: within/cross-domain matrices, novel-MR runs, Viggo runs
//!   and correlation analysis.

pub mod annotation;
pub mod client;
pub mod corpus;
pub mod experiment;
pub mod metrics;
pub mod mr;
pub mod prompt;
pub mod realizer;
mod util;

pub use mr::{KgMr, MeaningRepresentation, MrError, MrSchema, Topic, Triple, ViggoMr};
