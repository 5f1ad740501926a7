//! Meaning representations: knowledge-graph triple sets and Viggo dialogue
//! acts, with their textual forms.
//!
//! Textual forms:
//!
//! | form            | example                                                     |
//! |-----------------|-------------------------------------------------------------|
//! | KG pipe (S2S)   | `Starship = song = We Built This City \| ... = genre = pop rock` |
//! | KG paren        | `(The Beach Boys, song, Cotton Fields), (Cotton Fields, date, 1970)` |
//! | Viggo structured| `confirm(name[Tony Hawk's Pro Skater 3], release_year[2001])` |
//! | Viggo pipe (QA) | `confirm = yes \| name = Tony Hawk's Pro Skater 3 \| release_year = 2001` |
//!
//! Reserved delimiters are never escaped. Values that contain them are
//! rejected with [`MrError::EscapingRequired`].

mod kg;
mod schema;
mod viggo;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kg::{parse_kg_paren, parse_kg_s2s, serialize_kg_paren, serialize_kg_s2s};
pub use schema::{AttributeKind, AttributeSpec, MrSchema, RelationSpec, SchemaAdditions};
pub use viggo::{
    parse_viggo_mr, parse_viggo_mr_strict, parse_viggo_qa, parse_viggo_qa_strict,
    serialize_viggo_mr, serialize_viggo_qa,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MrError {
    #[error("syntax error in {input:?}: {reason}")]
    Syntax { input: String, reason: String },
    #[error("unknown dialogue act {0:?}")]
    UnknownDialogueAct(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("duplicate attribute {0:?}")]
    DuplicateAttribute(String),
    #[error("value {value:?} contains reserved delimiter {delimiter:?}")]
    EscapingRequired { value: String, delimiter: String },
    #[error("group {0:?} does not split into exactly three fields on commas")]
    AmbiguousCommaSplit(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("relation {relation:?} is not part of topic {topic}")]
    RelationOutsideTopic { relation: String, topic: Topic },
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
}

impl MrError {
    pub(crate) fn syntax(input: &str, reason: impl Into<String>) -> Self {
        MrError::Syntax {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}

/// A single (subject, relation, object) knowledge-graph fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    subject: String,
    relation: String,
    object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object_id: Option<String>,
}

impl Triple {
    /// Builds a triple from trimmed labels. All three labels must be non-empty.
    pub fn new(subject: &str, relation: &str, object: &str) -> Result<Self, MrError> {
        let subject = subject.trim();
        let relation = relation.trim();
        let object = object.trim();
        if subject.is_empty() {
            return Err(MrError::Empty("triple subject"));
        }
        if relation.is_empty() {
            return Err(MrError::Empty("triple relation"));
        }
        if object.is_empty() {
            return Err(MrError::Empty("triple object"));
        }
        Ok(Triple {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
            subject_id: None,
            object_id: None,
        })
    }

    pub fn with_ids(mut self, subject_id: Option<String>, object_id: Option<String>) -> Self {
        self.subject_id = subject_id.filter(|s| !s.is_empty());
        self.object_id = object_id.filter(|s| !s.is_empty());
        self
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    pub fn subject_id(&self) -> Option<&str> {
        self.subject_id.as_deref()
    }

    pub fn object_id(&self) -> Option<&str> {
        self.object_id.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topic {
    Movies,
    Music,
    Sports,
    Tv,
    Other,
}

impl Topic {
    pub const KG_TOPICS: [Topic; 4] = [Topic::Movies, Topic::Music, Topic::Sports, Topic::Tv];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::Movies => "movies",
            Topic::Music => "music",
            Topic::Sports => "sports",
            Topic::Tv => "tv",
            Topic::Other => "other",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Topic {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "movies" => Ok(Topic::Movies),
            "music" => Ok(Topic::Music),
            "sports" => Ok(Topic::Sports),
            "tv" => Ok(Topic::Tv),
            "other" => Ok(Topic::Other),
            other => Err(MrError::syntax(other, "unknown topic")),
        }
    }
}

/// An ordered, non-empty list of triples plus a topic tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KgMr {
    triples: Vec<Triple>,
    topic: Topic,
}

impl KgMr {
    pub fn new(triples: Vec<Triple>, topic: Topic) -> Result<Self, MrError> {
        if triples.is_empty() {
            return Err(MrError::Empty("triple list"));
        }
        Ok(KgMr { triples, topic })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn topic(&self) -> Topic {
        self.topic
    }

    pub fn with_topic(mut self, topic: Topic) -> Self {
        self.topic = topic;
        self
    }

    /// The ordered relation names, i.e. the signature a template must match.
    pub fn relation_signature(&self) -> Vec<&str> {
        self.triples.iter().map(Triple::relation).collect()
    }
}

/// One Viggo slot: an attribute with zero or more values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    attribute: String,
    values: Vec<String>,
}

impl Slot {
    pub fn new(attribute: &str, values: Vec<String>) -> Result<Self, MrError> {
        let attribute = attribute.trim();
        if attribute.is_empty() {
            return Err(MrError::Empty("attribute name"));
        }
        for reserved in ["[", "]", "(", ")", ",", "|", "="] {
            if attribute.contains(reserved) || attribute.chars().any(char::is_whitespace) {
                return Err(MrError::EscapingRequired {
                    value: attribute.to_string(),
                    delimiter: reserved.to_string(),
                });
            }
        }
        let mut cleaned = Vec::with_capacity(values.len());
        for v in values {
            let v = v.trim();
            if v.is_empty() {
                return Err(MrError::Empty("slot value"));
            }
            for reserved in ["[", "]", ",", " | "] {
                if v.contains(reserved) {
                    return Err(MrError::EscapingRequired {
                        value: v.to_string(),
                        delimiter: reserved.to_string(),
                    });
                }
            }
            cleaned.push(v.to_string());
        }
        Ok(Slot {
            attribute: attribute.to_string(),
            values: cleaned,
        })
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

/// A Viggo dialogue act with ordered slots. Attribute names are unique.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViggoMr {
    dialogue_act: String,
    slots: Vec<Slot>,
}

impl ViggoMr {
    pub fn new(dialogue_act: &str, slots: Vec<Slot>) -> Result<Self, MrError> {
        let da = dialogue_act.trim();
        if da.is_empty() {
            return Err(MrError::Empty("dialogue act"));
        }
        if !da.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(MrError::syntax(da, "dialogue act must be an identifier"));
        }
        let mut seen = std::collections::HashSet::new();
        for slot in &slots {
            if !seen.insert(slot.attribute.as_str()) {
                return Err(MrError::DuplicateAttribute(slot.attribute.clone()));
            }
        }
        Ok(ViggoMr {
            dialogue_act: da.to_string(),
            slots,
        })
    }

    pub fn dialogue_act(&self) -> &str {
        &self.dialogue_act
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, attribute: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.attribute == attribute)
    }
}

/// The unit of generation: either MR family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MeaningRepresentation {
    Kg(KgMr),
    Viggo(ViggoMr),
}

impl MeaningRepresentation {
    /// Number of triples (KG) or slots (Viggo); the denominator of semantic
    /// accuracy.
    pub fn content_count(&self) -> usize {
        match self {
            MeaningRepresentation::Kg(mr) => mr.triples().len(),
            MeaningRepresentation::Viggo(mr) => mr.slots().len(),
        }
    }

    pub fn dialogue_act(&self) -> Option<&str> {
        match self {
            MeaningRepresentation::Kg(_) => None,
            MeaningRepresentation::Viggo(mr) => Some(mr.dialogue_act()),
        }
    }

    /// The pipe serialization used in prompts (S2S triples for KG, QA fields
    /// for Viggo).
    pub fn to_prompt_line(&self) -> Result<String, MrError> {
        match self {
            MeaningRepresentation::Kg(mr) => serialize_kg_s2s(mr),
            MeaningRepresentation::Viggo(mr) => serialize_viggo_qa(mr),
        }
    }

    /// Parses any of the four textual forms. Pipe forms are told apart by the
    /// number of `" = "` separators per field.
    pub fn parse_any(text: &str) -> Result<Self, MrError> {
        let t = text.trim();
        if t.is_empty() {
            return Err(MrError::Empty("meaning representation"));
        }
        if t.starts_with('(') {
            return parse_kg_paren(t).map(MeaningRepresentation::Kg);
        }
        if t.contains(" = ") || t.ends_with(" =") {
            let first = t.split(" | ").next().unwrap_or(t);
            if first.matches(" = ").count() >= 2 {
                return parse_kg_s2s(t).map(MeaningRepresentation::Kg);
            }
            return parse_viggo_qa(t).map(MeaningRepresentation::Viggo);
        }
        parse_viggo_mr(t).map(MeaningRepresentation::Viggo)
    }
}

impl From<KgMr> for MeaningRepresentation {
    fn from(mr: KgMr) -> Self {
        MeaningRepresentation::Kg(mr)
    }
}

impl From<ViggoMr> for MeaningRepresentation {
    fn from(mr: ViggoMr) -> Self {
        MeaningRepresentation::Viggo(mr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_rejects_blank_fields() {
        assert_eq!(
            Triple::new(" ", "r", "o"),
            Err(MrError::Empty("triple subject"))
        );
        assert_eq!(
            Triple::new("s", "", "o"),
            Err(MrError::Empty("triple relation"))
        );
        assert_eq!(
            Triple::new("s", "r", "\t"),
            Err(MrError::Empty("triple object"))
        );
        let t = Triple::new("  Scream ", "cast member", "Liev Schreiber  ").unwrap();
        assert_eq!(t.subject(), "Scream");
        assert_eq!(t.object(), "Liev Schreiber");
    }

    #[test]
    fn viggo_rejects_duplicate_attribute() {
        let a = Slot::new("name", vec!["A".into()]).unwrap();
        let b = Slot::new("name", vec!["B".into()]).unwrap();
        assert_eq!(
            ViggoMr::new("inform", vec![a, b]),
            Err(MrError::DuplicateAttribute("name".into()))
        );
    }

    #[test]
    fn parse_any_dispatches_on_form() {
        let kg = MeaningRepresentation::parse_any("Scream = cast member = Liev Schreiber").unwrap();
        assert!(matches!(kg, MeaningRepresentation::Kg(_)));
        let paren =
            MeaningRepresentation::parse_any("(Wonder Woman, director, Patty Jenkins)").unwrap();
        assert!(matches!(paren, MeaningRepresentation::Kg(_)));
        let qa = MeaningRepresentation::parse_any("confirm = yes | name = Portal 2").unwrap();
        assert_eq!(qa.dialogue_act(), Some("confirm"));
        let qa_bare = MeaningRepresentation::parse_any("inform = yes").unwrap();
        assert_eq!(qa_bare.content_count(), 0);
        let structured =
            MeaningRepresentation::parse_any("request_attribute(has_multiplayer[])").unwrap();
        assert_eq!(structured.content_count(), 1);
    }
}
