//! Synthetic KG corpus generation with deterministic train/dev/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::source::TripleSource;
use super::template::{realize_in_group, TemplateBank};
use super::RealizerError;
use crate::corpus::{kg_corpus_to_string, KgRecord, Split};
use crate::mr::{serialize_kg_paren, serialize_kg_s2s, KgMr};
use crate::util::{derive_seed, sha256_hex, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplitConfig {
    pub train_target: usize,
    pub dev_target: usize,
    pub test_per_category: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: CorpusSplitConfig,
    pub provenance: String,
    /// category → split → record count
    pub counts: BTreeMap<String, BTreeMap<Split, usize>>,
    pub totals: BTreeMap<Split, usize>,
    /// Triple groups dropped because a label contains a reserved delimiter.
    pub skipped_groups: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// sha256 of the corpus file bytes.
    pub corpus_sha256: String,
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub records: Vec<KgRecord>,
    pub manifest: CorpusManifest,
}

impl GeneratedCorpus {
    pub fn corpus_text(&self) -> String {
        kg_corpus_to_string(&self.records)
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n"
    }

    /// Writes `corpus.jsonl` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), RealizerError> {
        let io = |e: std::io::Error| RealizerError::Io(format!("{}: {e}", dir.display()));
        write_atomic(&dir.join("corpus.jsonl"), self.corpus_text().as_bytes()).map_err(io)?;
        write_atomic(&dir.join("manifest.json"), self.manifest_json().as_bytes()).map_err(io)
    }
}

struct Candidate {
    category: String,
    mr: KgMr,
    key: String,
    paren: String,
}

/// Builds the corpus. Each category contributes exactly `test_per_category`
/// test records (the lowest-ranked under a seeded hash of the MR key); the
/// remaining records of all categories are ranked by a second seeded hash
/// and fill train, then dev. Shortfalls are reported as warnings in the
/// manifest and the partial corpus is still returned.
pub fn generate_corpus(
    source: &dyn TripleSource,
    bank: &TemplateBank,
    cfg: CorpusSplitConfig,
) -> Result<GeneratedCorpus, RealizerError> {
    let mut warnings = Vec::new();
    let mut skipped = 0;
    let mut seen = BTreeSet::new();
    let mut by_category: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();

    for category in bank.corpus_groups() {
        let template = bank.group(category)[0];
        let bucket = by_category.entry(category.to_string()).or_default();
        for triples in source.groups_for(template) {
            let mr =
                KgMr::new(triples, template.topic).map_err(|e| RealizerError::Io(e.to_string()))?;
            let (Ok(key), Ok(paren)) = (serialize_kg_s2s(&mr), serialize_kg_paren(&mr)) else {
                skipped += 1;
                continue;
            };
            if !template.matches(&mr) || !seen.insert(key.clone()) {
                continue;
            }
            bucket.push(Candidate {
                category: category.to_string(),
                mr,
                key,
                paren,
            });
        }
    }

    let mut test = Vec::new();
    let mut pool = Vec::new();
    for (category, mut items) in by_category {
        items.sort_by_key(|c| {
            (
                derive_seed(cfg.seed, &format!("test|{}", c.key)),
                c.key.clone(),
            )
        });
        if items.len() < cfg.test_per_category {
            warnings.push(format!(
                "insufficient triples: {category} has {} groups, {} requested for test",
                items.len(),
                cfg.test_per_category
            ));
        }
        let rest = items.split_off(cfg.test_per_category.min(items.len()));
        test.extend(items);
        pool.extend(rest);
    }
    pool.sort_by_key(|c| {
        (
            derive_seed(cfg.seed, &format!("pool|{}", c.key)),
            c.key.clone(),
        )
    });
    let available = pool.len();
    if available < cfg.train_target + cfg.dev_target {
        warnings.push(format!(
            "insufficient triples: {available} groups left for train+dev, {} requested",
            cfg.train_target + cfg.dev_target
        ));
    }
    let mut pool = pool.into_iter();
    let train: Vec<Candidate> = pool.by_ref().take(cfg.train_target).collect();
    let dev: Vec<Candidate> = pool.take(cfg.dev_target).collect();

    let mut records = Vec::new();
    let mut counts: BTreeMap<String, BTreeMap<Split, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<Split, usize> =
        [(Split::Train, 0), (Split::Dev, 0), (Split::Test, 0)].into();
    for (split, items) in [
        (Split::Train, train),
        (Split::Dev, dev),
        (Split::Test, test),
    ] {
        for c in items {
            let reference = realize_in_group(&c.mr, bank, &c.category, cfg.seed)?;
            *counts
                .entry(c.category.clone())
                .or_default()
                .entry(split)
                .or_default() += 1;
            *totals.entry(split).or_default() += 1;
            records.push(KgRecord {
                topic: c.mr.topic(),
                mr_paren: c.paren,
                mr_s2s: c.key,
                reference,
                template_category: c.category,
                split,
            });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let corpus_sha256 = sha256_hex(kg_corpus_to_string(&records).as_bytes());
    Ok(GeneratedCorpus {
        records,
        manifest: CorpusManifest {
            config: cfg,
            provenance: source.provenance(),
            counts,
            totals,
            skipped_groups: skipped,
            warnings,
            corpus_sha256,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realizer::SyntheticSource;

    #[test]
    fn all_zero_config_gives_empty_corpus() {
        let cfg = CorpusSplitConfig {
            train_target: 0,
            dev_target: 0,
            test_per_category: 0,
            seed: 3,
        };
        let out = generate_corpus(&SyntheticSource::new(5), &TemplateBank::builtin(), cfg).unwrap();
        assert!(out.records.is_empty());
        assert!(out.manifest.warnings.is_empty());
        assert_eq!(out.manifest.totals[&Split::Test], 0);
        assert_eq!(out.manifest.corpus_sha256, sha256_hex(b""));
    }

    #[test]
    fn shortfall_is_a_warning() {
        let cfg = CorpusSplitConfig {
            train_target: 100,
            dev_target: 10,
            test_per_category: 4,
            seed: 3,
        };
        let out = generate_corpus(&SyntheticSource::new(5), &TemplateBank::builtin(), cfg).unwrap();
        assert_eq!(out.manifest.totals[&Split::Test], 4 * 12);
        assert_eq!(out.manifest.totals[&Split::Train], 12);
        assert_eq!(out.manifest.totals[&Split::Dev], 0);
        assert_eq!(out.manifest.warnings.len(), 1);
    }

    #[test]
    fn seed_changes_partition_but_not_sizes() {
        let bank = TemplateBank::builtin();
        let src = SyntheticSource::new(30);
        let mk = |seed| {
            generate_corpus(
                &src,
                &bank,
                CorpusSplitConfig {
                    train_target: 200,
                    dev_target: 20,
                    test_per_category: 5,
                    seed,
                },
            )
            .unwrap()
        };
        let (a, b) = (mk(1), mk(2));
        assert_eq!(a.manifest.totals, b.manifest.totals);
        assert_ne!(a.manifest.corpus_sha256, b.manifest.corpus_sha256);
        assert_eq!(mk(1).corpus_text(), a.corpus_text());
    }
}
