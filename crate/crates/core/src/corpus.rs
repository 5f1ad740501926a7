//! Corpus file formats.
//!
//! - Viggo: CSV with an MR column (`mr` or `meaning_representation`) and a
//!   reference column (`ref`, `target` or `references`), one file per split.
//! - KG: JSON lines, one [`KgRecord`] per line with the fields
//!   `topic, mr_paren, mr_s2s, reference, template_category, split`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mr::{self, KgMr, MeaningRepresentation, MrError, MrSchema, Topic, ViggoMr};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column {column}")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}:{line}: {source}")]
    Mr {
        path: String,
        line: usize,
        source: MrError,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// Anything that can serve as a few-shot exemplar or a test item.
pub trait CorpusItem {
    /// Stable unique key, used for leakage checks and manifests.
    fn key(&self) -> &str;
    fn mr(&self) -> MeaningRepresentation;
    fn reference(&self) -> &str;
    fn dialogue_act(&self) -> Option<&str> {
        None
    }
    fn topic(&self) -> Option<Topic> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViggoRecord {
    pub key: String,
    pub split: Split,
    pub mr: ViggoMr,
    pub reference: String,
}

impl CorpusItem for ViggoRecord {
    fn key(&self) -> &str {
        &self.key
    }

    fn mr(&self) -> MeaningRepresentation {
        MeaningRepresentation::Viggo(self.mr.clone())
    }

    fn reference(&self) -> &str {
        &self.reference
    }

    fn dialogue_act(&self) -> Option<&str> {
        Some(self.mr.dialogue_act())
    }
}

/// One line of the KG corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgRecord {
    pub topic: Topic,
    pub mr_paren: String,
    pub mr_s2s: String,
    pub reference: String,
    pub template_category: String,
    pub split: Split,
}

impl KgRecord {
    pub fn parse_mr(&self) -> Result<KgMr, MrError> {
        Ok(mr::parse_kg_s2s(&self.mr_s2s)?.with_topic(self.topic))
    }
}

impl CorpusItem for KgRecord {
    /// The S2S form is unique per record.
    fn key(&self) -> &str {
        &self.mr_s2s
    }

    fn mr(&self) -> MeaningRepresentation {
        MeaningRepresentation::Kg(self.parse_mr().expect("corpus records hold valid MRs"))
    }

    fn reference(&self) -> &str {
        &self.reference
    }

    fn topic(&self) -> Option<Topic> {
        Some(self.topic)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads one Viggo split. Keys are `<split>-<row index>`. With a schema,
/// every MR is validated strictly.
pub fn read_viggo_csv(
    path: &Path,
    split: Split,
    schema: Option<&MrSchema>,
) -> Result<Vec<ViggoRecord>, CorpusError> {
    let p = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| CorpusError::Csv {
        path: p.clone(),
        source,
    })?;
    let headers = reader
        .headers()
        .map_err(|source| CorpusError::Csv {
            path: p.clone(),
            source,
        })?
        .clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let mr_col = find(&["mr", "meaning_representation"]).ok_or(CorpusError::MissingColumn {
        path: p.clone(),
        column: "mr",
    })?;
    let ref_col = find(&["ref", "target", "references"]).ok_or(CorpusError::MissingColumn {
        path: p.clone(),
        column: "ref",
    })?;

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|source| CorpusError::Csv {
            path: p.clone(),
            source,
        })?;
        let line = i + 2;
        let text = row.get(mr_col).unwrap_or_default();
        let parsed = match schema {
            Some(s) => mr::parse_viggo_mr_strict(text, s),
            None => mr::parse_viggo_mr(text),
        }
        .map_err(|source| CorpusError::Mr {
            path: p.clone(),
            line,
            source,
        })?;
        out.push(ViggoRecord {
            key: format!("{}-{:04}", split.as_str(), i),
            split,
            mr: parsed,
            reference: row.get(ref_col).unwrap_or_default().trim().to_string(),
        });
    }
    Ok(out)
}

/// Loads `train.csv`, `valid.csv` (or `dev.csv`) and `test.csv` from a
/// directory; missing split files are skipped.
pub fn read_viggo_dir(
    dir: &Path,
    schema: Option<&MrSchema>,
) -> Result<Vec<ViggoRecord>, CorpusError> {
    let mut all = Vec::new();
    for (name, split) in [
        ("train", Split::Train),
        ("valid", Split::Dev),
        ("dev", Split::Dev),
        ("test", Split::Test),
    ] {
        let path = dir.join(format!("{name}.csv"));
        if path.exists() {
            all.extend(read_viggo_csv(&path, split, schema)?);
        }
    }
    Ok(all)
}

pub fn read_kg_corpus(path: &Path) -> Result<Vec<KgRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: KgRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        record.parse_mr().map_err(|source| CorpusError::Mr {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn kg_corpus_to_string(records: &[KgRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_kg_corpus(path: &Path, records: &[KgRecord]) -> Result<(), CorpusError> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(kg_corpus_to_string(records).as_bytes())
        .map_err(|e| io_err(path, e))
}

/// Path to the Viggo-format fixture corpus shipped with the crate.
pub fn bundled_viggo_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/viggo")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_viggo_loads_strictly() {
        let schema = MrSchema::builtin();
        let records = read_viggo_dir(&bundled_viggo_dir(), Some(&schema)).unwrap();
        assert!(records.iter().filter(|r| r.split == Split::Test).count() >= 100);
        let das: std::collections::BTreeSet<_> =
            records.iter().map(|r| r.mr.dialogue_act()).collect();
        assert_eq!(das.len(), 9);
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        std::fs::write(&path, "meaning,text\ninform(name[A]),A\n").unwrap();
        assert!(matches!(
            read_viggo_csv(&path, Split::Train, None),
            Err(CorpusError::MissingColumn { .. })
        ));
    }

    #[test]
    fn kg_corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.jsonl");
        let records = vec![KgRecord {
            topic: Topic::Movies,
            mr_paren: "(Scream, cast member, Liev Schreiber)".into(),
            mr_s2s: "Scream = cast member = Liev Schreiber".into(),
            reference: "Liev Schreiber was really good in Scream, don't you agree?.".into(),
            template_category: "movies.cast_member".into(),
            split: Split::Train,
        }];
        write_kg_corpus(&path, &records).unwrap();
        assert_eq!(read_kg_corpus(&path).unwrap(), records);
        let line = std::fs::read_to_string(&path).unwrap();
        assert!(line.starts_with("{\"topic\":\"movies\",\"mr_paren\":"));
    }
}
