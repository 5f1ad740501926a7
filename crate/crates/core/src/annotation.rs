//! Human labels for generated outputs: capture, storage, validation and
//! aggregation.
//!
//! Coherence anchors: 3 = makes sense and is natural; 2 = understandable but
//! flawed (awkward, redundant, slightly off); 1 = incoherent. Only the top
//! anchor comes from the original evaluation protocol; 2 and 1 are defined
//! by this toolkit.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::GenerationRecord;
use crate::metrics::word_count;
use crate::mr::MeaningRepresentation;

/// Optional note tags for failure modes that are not scored.
pub const NOTE_TAGS: [&str; 2] = ["redundant", "contradictory"];

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("{field} must be {expected}, got {value:?}")]
    OutOfRangeLabel {
        field: &'static str,
        expected: String,
        value: String,
    },
    #[error("store not found: {0}")]
    StoreMissing(PathBuf),
    #[error("item {item_key}: total {got} does not match the MR's {expected} slot(s)/triple(s)")]
    TotalMismatch {
        item_key: String,
        expected: usize,
        got: usize,
    },
    #[error("item {item_key}: realized {realized} exceeds total {total}")]
    RealizedExceedsTotal {
        item_key: String,
        realized: usize,
        total: usize,
    },
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("no records in group {0:?}")]
    EmptyGroup(String),
    #[error("bad filter {0:?}: expected comma-separated field=value terms")]
    BadFilter(String),
    #[error("{path}:{line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One output to be labeled: a single candidate of a stored generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationItem {
    /// `<cache_key>#<candidate index>`.
    pub item_key: String,
    pub model: String,
    pub topic: String,
    pub dialogue_act: Option<String>,
    pub mr: String,
    pub text: String,
    /// Slot or triple count of the MR.
    pub total: usize,
}

pub fn item_key(cache_key: &str, candidate: usize) -> String {
    format!("{cache_key}#{candidate}")
}

/// Expands generation records into labelable items. Records whose MR line
/// does not parse are skipped.
pub fn items_from_generations(records: &[GenerationRecord]) -> Vec<AnnotationItem> {
    let mut out = Vec::new();
    for rec in records {
        let Some(mr_text) = rec.mr.as_deref() else {
            continue;
        };
        let Ok(mr) = MeaningRepresentation::parse_any(mr_text) else {
            log::warn!("skipping {}: MR line does not parse", rec.cache_key);
            continue;
        };
        let topic = rec.tags.get("topic").cloned().unwrap_or_else(|| match &mr {
            MeaningRepresentation::Viggo(_) => "video_games".into(),
            MeaningRepresentation::Kg(kg) => kg.topic().to_string(),
        });
        let model = rec
            .tags
            .get("model")
            .cloned()
            .unwrap_or_else(|| rec.backend_id.clone());
        for (i, text) in rec.candidates.iter().enumerate() {
            out.push(AnnotationItem {
                item_key: item_key(&rec.cache_key, i),
                model: model.clone(),
                topic: topic.clone(),
                dialogue_act: mr.dialogue_act().map(str::to_string),
                mr: mr_text.to_string(),
                text: text.clone(),
                total: mr.content_count(),
            });
        }
    }
    out
}

/// Conjunction of `field=value` terms over `topic`, `model`, `da` and
/// `key` (prefix match on the item key).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemFilter {
    terms: Vec<(String, String)>,
}

impl ItemFilter {
    pub fn all() -> Self {
        ItemFilter::default()
    }

    pub fn parse(expr: &str) -> Result<Self, AnnotationError> {
        let mut terms = Vec::new();
        for term in expr.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (field, value) = term
                .split_once('=')
                .ok_or_else(|| AnnotationError::BadFilter(expr.into()))?;
            let field = field.trim();
            if !matches!(field, "topic" | "model" | "da" | "key") {
                return Err(AnnotationError::BadFilter(expr.into()));
            }
            terms.push((field.to_string(), value.trim().to_string()));
        }
        Ok(ItemFilter { terms })
    }

    pub fn matches(&self, item: &AnnotationItem) -> bool {
        self.terms.iter().all(|(f, v)| match f.as_str() {
            "topic" => &item.topic == v,
            "model" => &item.model == v,
            "da" => item.dialogue_act.as_deref() == Some(v.as_str()),
            "key" => item.item_key.starts_with(v.as_str()),
            _ => false,
        })
    }
}

/// Grouping fields copied from the item at labeling time, so that a record
/// set can be aggregated on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemContext {
    pub model: String,
    pub topic: String,
    pub dialogue_act: Option<String>,
    pub word_count: usize,
}

impl From<&AnnotationItem> for ItemContext {
    fn from(item: &AnnotationItem) -> Self {
        ItemContext {
            model: item.model.clone(),
            topic: item.topic.clone(),
            dialogue_act: item.dialogue_act.clone(),
            word_count: word_count(&item.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_key: String,
    pub rater_id: String,
    pub coherence: u8,
    pub realized: usize,
    pub total: usize,
    pub good_hallucination: bool,
    pub bad_hallucination: bool,
    pub question_added: bool,
    #[serde(default)]
    pub da_match: Option<bool>,
    #[serde(default)]
    pub notes: String,
    pub context: ItemContext,
}

impl AnnotationRecord {
    /// Range checks that need no item.
    pub fn check(&self) -> Result<(), AnnotationError> {
        if !(1..=3).contains(&self.coherence) {
            return Err(AnnotationError::OutOfRangeLabel {
                field: "coherence",
                expected: "1, 2 or 3".into(),
                value: self.coherence.to_string(),
            });
        }
        if self.realized > self.total {
            return Err(AnnotationError::RealizedExceedsTotal {
                item_key: self.item_key.clone(),
                realized: self.realized,
                total: self.total,
            });
        }
        Ok(())
    }

    /// Full validation against the labeled item's MR.
    pub fn validate(&self, item: &AnnotationItem) -> Result<(), AnnotationError> {
        self.check()?;
        let expected = MeaningRepresentation::parse_any(&item.mr)
            .map(|m| m.content_count())
            .unwrap_or(item.total);
        if self.total != expected {
            return Err(AnnotationError::TotalMismatch {
                item_key: self.item_key.clone(),
                expected,
                got: self.total,
            });
        }
        Ok(())
    }
}

/// Append-only JSON-lines store of annotation records.
///
/// Line fields, in order: `item_key, rater_id, coherence, realized, total,
/// good_hallucination, bad_hallucination, question_added, da_match, notes,
/// context`.
pub struct AnnotationStore {
    path: PathBuf,
    records: Vec<AnnotationRecord>,
    done: HashSet<(String, String)>,
    writer: File,
}

impl AnnotationStore {
    /// Opens or creates the store.
    pub fn open(path: &Path) -> Result<Self, AnnotationError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let records = if path.exists() {
            read_records(path)?
        } else {
            Vec::new()
        };
        let done = records
            .iter()
            .map(|r| (r.item_key.clone(), r.rater_id.clone()))
            .collect();
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AnnotationStore {
            path: path.to_path_buf(),
            records,
            done,
            writer,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn is_labeled(&self, item_key: &str, rater_id: &str) -> bool {
        self.done
            .contains(&(item_key.to_string(), rater_id.to_string()))
    }

    /// Appends one record as a single line write. A second record for the
    /// same (item, rater) pair is ignored and reported as `false`.
    pub fn append(&mut self, record: &AnnotationRecord) -> Result<bool, AnnotationError> {
        record.check()?;
        if self.is_labeled(&record.item_key, &record.rater_id) {
            return Ok(false);
        }
        let mut line =
            serde_json::to_string(record).map_err(|e| io::Error::other(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        self.done
            .insert((record.item_key.clone(), record.rater_id.clone()));
        self.records.push(record.clone());
        Ok(true)
    }
}

/// Reads an existing store without opening it for writing.
pub fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    if !path.exists() {
        return Err(AnnotationError::StoreMissing(path.to_path_buf()));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| AnnotationError::Format {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads one answer, re-prompting until `parse` accepts it. `None` on end
/// of input.
fn ask<R: BufRead, W: Write, T>(
    input: &mut R,
    out: &mut W,
    question: &str,
    parse: impl Fn(&str) -> Result<T, AnnotationError>,
) -> Result<Option<T>, AnnotationError> {
    loop {
        write!(out, "{question} ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        match parse(line.trim()) {
            Ok(v) => return Ok(Some(v)),
            Err(e) => writeln!(out, "  {e}; try again")?,
        }
    }
}

fn parse_flag(field: &'static str, s: &str) -> Result<bool, AnnotationError> {
    match s.to_ascii_lowercase().as_str() {
        "" | "n" | "no" | "0" => Ok(false),
        "y" | "yes" | "1" => Ok(true),
        _ => Err(AnnotationError::OutOfRangeLabel {
            field,
            expected: "y or n".into(),
            value: s.into(),
        }),
    }
}

/// Interactive labeling loop. Items already labeled by `rater_id` are
/// skipped, so an interrupted session resumes where it stopped. Returns the
/// number of records appended; ends early on end of input.
pub fn annotate<R: BufRead, W: Write>(
    items: &[AnnotationItem],
    store: &mut AnnotationStore,
    filter: &ItemFilter,
    rater_id: &str,
    input: &mut R,
    out: &mut W,
) -> Result<usize, AnnotationError> {
    let pending: Vec<&AnnotationItem> = items
        .iter()
        .filter(|i| filter.matches(i) && !store.is_labeled(&i.item_key, rater_id))
        .collect();
    let mut appended = 0;
    for (n, item) in pending.iter().enumerate() {
        writeln!(
            out,
            "\n[{}/{}] {}  ({} / {})",
            n + 1,
            pending.len(),
            item.item_key,
            item.model,
            item.topic
        )?;
        writeln!(out, "MR:     {}", item.mr)?;
        writeln!(out, "OUTPUT: {}", item.text)?;
        let total = item.total;
        let Some(coherence) = ask(
            input,
            out,
            "coherence (3 natural, 2 flawed, 1 incoherent):",
            |s| {
                s.parse::<u8>()
                    .ok()
                    .filter(|c| (1..=3).contains(c))
                    .ok_or_else(|| AnnotationError::OutOfRangeLabel {
                        field: "coherence",
                        expected: "1, 2 or 3".into(),
                        value: s.into(),
                    })
            },
        )?
        else {
            break;
        };
        let Some(realized) = ask(input, out, &format!("realized of {total} [0]:"), |s| {
            if s.is_empty() {
                return Ok(0);
            }
            s.parse::<usize>()
                .ok()
                .filter(|r| *r <= total)
                .ok_or_else(|| AnnotationError::OutOfRangeLabel {
                    field: "realized",
                    expected: format!("0..={total}"),
                    value: s.into(),
                })
        })?
        else {
            break;
        };
        let Some(good) = ask(input, out, "good hallucination? [y/N]:", |s| {
            parse_flag("good_hallucination", s)
        })?
        else {
            break;
        };
        let Some(bad) = ask(input, out, "bad hallucination? [y/N]:", |s| {
            parse_flag("bad_hallucination", s)
        })?
        else {
            break;
        };
        let Some(question) = ask(input, out, "question added? [y/N]:", |s| {
            parse_flag("question_added", s)
        })?
        else {
            break;
        };
        let da_match = if item.dialogue_act.is_some() {
            let Some(v) = ask(
                input,
                out,
                "dialogue act matches? [y/n/blank to skip]:",
                |s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        parse_flag("da_match", s).map(Some)
                    }
                },
            )?
            else {
                break;
            };
            v
        } else {
            None
        };
        let Some(notes) = ask(
            input,
            out,
            &format!("notes (tags: {}):", NOTE_TAGS.join(", ")),
            |s| Ok(s.to_string()),
        )?
        else {
            break;
        };
        let record = AnnotationRecord {
            item_key: item.item_key.clone(),
            rater_id: rater_id.to_string(),
            coherence,
            realized,
            total,
            good_hallucination: good,
            bad_hallucination: bad,
            question_added: question,
            da_match,
            notes,
            context: ItemContext::from(*item),
        };
        record.validate(item)?;
        if store.append(&record)? {
            appended += 1;
        }
    }
    Ok(appended)
}

/// Checks every record against its item.
pub fn validate_all(
    records: &[AnnotationRecord],
    items: &[AnnotationItem],
) -> Result<(), AnnotationError> {
    let by_key: BTreeMap<&str, &AnnotationItem> =
        items.iter().map(|i| (i.item_key.as_str(), i)).collect();
    for r in records {
        let item = by_key
            .get(r.item_key.as_str())
            .ok_or_else(|| AnnotationError::UnknownItem(r.item_key.clone()))?;
        r.validate(item)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Topic,
    Model,
    DialogueAct,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topic" => Ok(GroupBy::Topic),
            "model" => Ok(GroupBy::Model),
            "dialogue_act" | "da" => Ok(GroupBy::DialogueAct),
            other => Err(format!(
                "unknown grouping {other:?} (topic, model, dialogue_act)"
            )),
        }
    }
}

impl GroupBy {
    fn key(self, r: &AnnotationRecord) -> String {
        match self {
            GroupBy::Topic => r.context.topic.clone(),
            GroupBy::Model => r.context.model.clone(),
            GroupBy::DialogueAct => r.context.dialogue_act.clone().unwrap_or_else(|| "-".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub group: String,
    pub n: usize,
    pub coherence: f64,
    /// Σrealized / Σtotal.
    pub semantic_accuracy_pooled: f64,
    /// Mean of per-record realized / total.
    pub semantic_accuracy_mean: f64,
    pub good_hallucination_pct: f64,
    pub bad_hallucination_pct: f64,
    pub question_added_pct: f64,
    pub mean_words: f64,
    /// Share of labeled Viggo records whose dialogue act matched.
    pub da_match_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub group_by: GroupBy,
    pub rows: Vec<SummaryRow>,
    pub overall: SummaryRow,
}

fn summarize(group: String, records: &[&AnnotationRecord]) -> Result<SummaryRow, AnnotationError> {
    if records.is_empty() {
        return Err(AnnotationError::EmptyGroup(group));
    }
    // Canonical order keeps float sums independent of input order.
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| (&a.item_key, &a.rater_id).cmp(&(&b.item_key, &b.rater_id)));
    let n = sorted.len() as f64;
    let pct = |f: &dyn Fn(&AnnotationRecord) -> bool| {
        100.0 * sorted.iter().filter(|r| f(r)).count() as f64 / n
    };
    let realized: usize = sorted.iter().map(|r| r.realized).sum();
    let total: usize = sorted.iter().map(|r| r.total).sum();
    let ratio = |r: &AnnotationRecord| {
        if r.total == 0 {
            1.0
        } else {
            r.realized as f64 / r.total as f64
        }
    };
    let da: Vec<bool> = sorted.iter().filter_map(|r| r.da_match).collect();
    Ok(SummaryRow {
        group,
        n: sorted.len(),
        coherence: sorted.iter().map(|r| r.coherence as f64).sum::<f64>() / n,
        semantic_accuracy_pooled: if total == 0 {
            1.0
        } else {
            realized as f64 / total as f64
        },
        semantic_accuracy_mean: sorted.iter().map(|r| ratio(r)).sum::<f64>() / n,
        good_hallucination_pct: pct(&|r| r.good_hallucination),
        bad_hallucination_pct: pct(&|r| r.bad_hallucination),
        question_added_pct: pct(&|r| r.question_added),
        mean_words: sorted
            .iter()
            .map(|r| r.context.word_count as f64)
            .sum::<f64>()
            / n,
        da_match_pct: (!da.is_empty())
            .then(|| 100.0 * da.iter().filter(|m| **m).count() as f64 / da.len() as f64),
    })
}

/// Per-group means plus an overall row. Raters are not adjudicated; every
/// record counts once.
pub fn aggregate(
    records: &[AnnotationRecord],
    group_by: GroupBy,
) -> Result<SummaryTable, AnnotationError> {
    let mut groups: BTreeMap<String, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(group_by.key(r)).or_default().push(r);
    }
    let rows = groups
        .into_iter()
        .map(|(g, rs)| summarize(g, &rs))
        .collect::<Result<Vec<_>, _>>()?;
    let overall = summarize("overall".into(), &records.iter().collect::<Vec<_>>())?;
    Ok(SummaryTable {
        group_by,
        rows,
        overall,
    })
}

impl SummaryTable {
    const HEADER: [&'static str; 10] = [
        "group",
        "n",
        "coherence",
        "sa_pooled",
        "sa_mean",
        "good_hall_%",
        "bad_hall_%",
        "question_%",
        "words",
        "da_match_%",
    ];

    fn cells(row: &SummaryRow) -> Vec<String> {
        vec![
            row.group.clone(),
            row.n.to_string(),
            format!("{:.2}", row.coherence),
            format!("{:.2}", row.semantic_accuracy_pooled),
            format!("{:.2}", row.semantic_accuracy_mean),
            format!("{:.1}", row.good_hallucination_pct),
            format!("{:.1}", row.bad_hallucination_pct),
            format!("{:.1}", row.question_added_pct),
            format!("{:.1}", row.mean_words),
            row.da_match_pct
                .map_or_else(|| "-".into(), |p| format!("{p:.1}")),
        ]
    }

    fn all_rows(&self) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().chain(std::iter::once(&self.overall))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "| {} |\n|{}\n",
            Self::HEADER.join(" | "),
            "---|".repeat(Self::HEADER.len())
        );
        for row in self.all_rows() {
            s.push_str(&format!("| {} |\n", Self::cells(row).join(" | ")));
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = Self::HEADER.join("\t") + "\n";
        for row in self.all_rows() {
            s.push_str(&(Self::cells(row).join("\t") + "\n"));
        }
        s
    }
}

/// Raters present in a record set, sorted.
pub fn raters(records: &[AnnotationRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.rater_id.as_str()).collect()
}
