use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RealizerError;
use crate::mr::{serialize_kg_s2s, KgMr, Topic, Triple};
use crate::util::derive_seed;

const BUILTIN_TEMPLATES: &str = include_str!("../../data/templates.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub topic: Topic,
    /// Paraphrase group, also used as the corpus template category.
    pub group: String,
    pub relations: Vec<String>,
    /// Anchor placeholder (`subject_N` / `object_N`) for the subject of each
    /// follow-on triple. Empty means every triple shares `subject_1`.
    #[serde(default)]
    pub links: Vec<String>,
    pub surface: String,
    #[serde(default)]
    pub asks_question: bool,
    #[serde(default)]
    pub corpus: bool,
    #[serde(default)]
    pub canonical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Subject,
    Object,
}

fn parse_placeholder(name: &str) -> Option<(Role, usize)> {
    let (role, idx) = match name.strip_prefix("subject_") {
        Some(rest) => (Role::Subject, rest),
        None => (Role::Object, name.strip_prefix("object_")?),
    };
    let n: usize = idx.parse().ok()?;
    (n >= 1).then_some((role, n))
}

fn pick(triples: &[Triple], role: Role, n: usize) -> &str {
    let t = &triples[n - 1];
    match role {
        Role::Subject => t.subject(),
        Role::Object => t.object(),
    }
}

impl Template {
    /// Anchor placeholder for triple `i` (0-based, i ≥ 1).
    fn link(&self, i: usize) -> &str {
        self.links
            .get(i - 1)
            .map(String::as_str)
            .unwrap_or("subject_1")
    }

    fn validate(&self) -> Result<(), RealizerError> {
        let bad = |reason: String| RealizerError::InvalidTemplate {
            id: self.id.clone(),
            reason,
        };
        if self.relations.is_empty() {
            return Err(bad("empty relation signature".into()));
        }
        let arity = self.relations.len();
        if !self.links.is_empty() && self.links.len() != arity - 1 {
            return Err(bad(format!(
                "{} links for {} relations",
                self.links.len(),
                arity
            )));
        }
        for (i, link) in self.links.iter().enumerate() {
            match parse_placeholder(link) {
                // The anchor must be an entity of an earlier triple.
                Some((_, n)) if n <= i + 1 => {}
                _ => return Err(bad(format!("link {link} does not name an earlier entity"))),
            }
        }
        let mut used = BTreeSet::new();
        for name in self.placeholders()? {
            match parse_placeholder(&name) {
                Some((_, n)) if n <= arity => {
                    used.insert(name);
                }
                _ => {
                    return Err(bad(format!(
                        "placeholder {{{name}}} is not bound by the signature"
                    )))
                }
            }
        }
        for n in 1..=arity {
            if !used.contains(&format!("object_{n}")) {
                return Err(bad(format!("surface never realizes object_{n}")));
            }
        }
        Ok(())
    }

    fn placeholders(&self) -> Result<Vec<String>, RealizerError> {
        let mut out = Vec::new();
        let mut rest = self.surface.as_str();
        while let Some(start) = rest.find('{') {
            let Some(end) = rest[start..].find('}') else {
                return Err(RealizerError::InvalidTemplate {
                    id: self.id.clone(),
                    reason: "unclosed placeholder".into(),
                });
            };
            out.push(rest[start + 1..start + end].to_string());
            rest = &rest[start + end + 1..];
        }
        Ok(out)
    }

    /// Whether the MR has this template's relation sequence and its triples
    /// are chained the way the template's links require.
    pub fn matches(&self, mr: &KgMr) -> bool {
        let triples = mr.triples();
        if triples.len() != self.relations.len()
            || triples
                .iter()
                .zip(&self.relations)
                .any(|(t, r)| t.relation() != r)
        {
            return false;
        }
        (1..triples.len()).all(|i| {
            let (role, n) = parse_placeholder(self.link(i)).expect("validated link");
            triples[i].subject() == pick(triples, role, n)
        })
    }

    /// Substitutes the MR's entities into the surface. The caller must have
    /// checked [`Template::matches`].
    pub fn fill(&self, mr: &KgMr) -> String {
        let triples = mr.triples();
        let mut out = String::with_capacity(self.surface.len() + 32);
        let mut rest = self.surface.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let end = start + rest[start..].find('}').expect("validated surface");
            let (role, n) =
                parse_placeholder(&rest[start + 1..end]).expect("validated placeholder");
            out.push_str(pick(triples, role, n));
            rest = &rest[end + 1..];
        }
        out.push_str(rest);
        out
    }
}

#[derive(Debug, Deserialize)]
struct BankFile {
    version: u32,
    #[serde(default, rename = "template")]
    templates: Vec<Template>,
}

/// A validated set of templates.
#[derive(Debug, Clone, Default)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

impl TemplateBank {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_TEMPLATES).expect("built-in template bank is valid")
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, RealizerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RealizerError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, RealizerError> {
        let file: BankFile =
            toml::from_str(text).map_err(|e| RealizerError::BankFormat(e.to_string()))?;
        if file.version != 1 {
            return Err(RealizerError::BankFormat(format!(
                "unsupported bank version {}",
                file.version
            )));
        }
        Self::new(file.templates)
    }

    pub fn new(templates: Vec<Template>) -> Result<Self, RealizerError> {
        let mut ids = BTreeSet::new();
        let mut groups: BTreeMap<&str, &Template> = BTreeMap::new();
        for t in &templates {
            t.validate()?;
            if !ids.insert(t.id.as_str()) {
                return Err(RealizerError::InvalidTemplate {
                    id: t.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
            if let Some(first) = groups.get(t.group.as_str()) {
                if first.relations != t.relations
                    || first.links != t.links
                    || first.topic != t.topic
                {
                    return Err(RealizerError::InvalidTemplate {
                        id: t.id.clone(),
                        reason: format!("differs in signature or topic from group {}", t.group),
                    });
                }
            } else {
                groups.insert(&t.group, t);
            }
        }
        Ok(TemplateBank { templates })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Group ids in sorted order.
    pub fn groups(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.templates.iter().map(|t| t.group.as_str()).collect();
        set.into_iter().collect()
    }

    /// Groups flagged for synthetic corpus generation, sorted.
    pub fn corpus_groups(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .templates
            .iter()
            .filter(|t| t.corpus)
            .map(|t| t.group.as_str())
            .collect();
        set.into_iter().collect()
    }

    pub fn group(&self, group: &str) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.group == group).collect()
    }

    /// The paraphrase group that realizes `mr`: among groups whose templates
    /// match, prefer those of the MR's topic, then the lowest group id.
    pub fn group_for(&self, mr: &KgMr) -> Option<&str> {
        let matching: BTreeSet<(bool, &str)> = self
            .templates
            .iter()
            .filter(|t| t.matches(mr))
            .map(|t| (t.topic != mr.topic(), t.group.as_str()))
            .collect();
        matching.into_iter().next().map(|(_, g)| g)
    }
}

fn signature_error(mr: &KgMr) -> RealizerError {
    RealizerError::NoTemplateForSignature {
        signature: mr
            .relation_signature()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    }
}

/// Realizes a KG MR with the bank. The paraphrase is drawn uniformly from the
/// selected group with an RNG seeded from `choice_seed` and the MR itself, so
/// equal inputs always give equal text.
pub fn realize(mr: &KgMr, bank: &TemplateBank, choice_seed: u64) -> Result<String, RealizerError> {
    let group = bank.group_for(mr).ok_or_else(|| signature_error(mr))?;
    realize_in_group(mr, bank, group, choice_seed)
}

pub fn realize_in_group(
    mr: &KgMr,
    bank: &TemplateBank,
    group: &str,
    choice_seed: u64,
) -> Result<String, RealizerError> {
    let members: Vec<&Template> = bank
        .group(group)
        .into_iter()
        .filter(|t| t.matches(mr))
        .collect();
    let key = serialize_kg_s2s(mr).unwrap_or_else(|_| format!("{:?}", mr.triples()));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(choice_seed, &key));
    let template = members
        .choose(&mut rng)
        .ok_or_else(|| signature_error(mr))?;
    Ok(template.fill(mr))
}
