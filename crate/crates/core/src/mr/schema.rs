use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KgMr, MrError, Topic, ViggoMr};

const BUILTIN_SCHEMA: &str = include_str!("../../data/schema.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    FreeText,
    Enumerated,
    Boolean,
    Year,
    List,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default = "default_origin")]
    pub origin: String,
}

fn default_origin() -> String {
    "corpus".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub topic: Topic,
    pub name: String,
    /// WikiData property ID.
    pub property: String,
    #[serde(default)]
    pub inverse: bool,
    #[serde(default)]
    pub novel: bool,
    #[serde(default)]
    pub verified: bool,
}

#[derive(Debug, Deserialize, Serialize)]
struct SchemaFile {
    version: u32,
    dialogue_acts: Vec<String>,
    #[serde(default, rename = "attribute")]
    attributes: Vec<AttributeSpec>,
    #[serde(default, rename = "relation")]
    relations: Vec<RelationSpec>,
}

/// What [`MrSchema::close_over`] had to add to cover a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaAdditions {
    pub dialogue_acts: Vec<String>,
    pub attributes: Vec<String>,
}

impl SchemaAdditions {
    pub fn is_empty(&self) -> bool {
        self.dialogue_acts.is_empty() && self.attributes.is_empty()
    }
}

/// Closed inventory of dialogue acts, attributes and per-topic KG relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrSchema {
    dialogue_acts: BTreeSet<String>,
    attributes: BTreeMap<String, AttributeSpec>,
    relations: Vec<RelationSpec>,
}

impl MrSchema {
    /// The schema file shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_SCHEMA).expect("built-in schema parses")
    }

    pub fn load(path: &Path) -> Result<Self, MrError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MrError::syntax(&path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, MrError> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| MrError::syntax("schema", e.to_string()))?;
        if file.version != 1 {
            return Err(MrError::syntax(
                "schema",
                format!("unsupported schema version {}", file.version),
            ));
        }
        let mut attributes = BTreeMap::new();
        for attr in file.attributes {
            if attributes.insert(attr.name.clone(), attr.clone()).is_some() {
                return Err(MrError::DuplicateAttribute(attr.name));
            }
        }
        Ok(MrSchema {
            dialogue_acts: file.dialogue_acts.into_iter().collect(),
            attributes,
            relations: file.relations,
        })
    }

    pub fn to_toml(&self) -> String {
        let file = SchemaFile {
            version: 1,
            dialogue_acts: self.dialogue_acts.iter().cloned().collect(),
            attributes: self.attributes.values().cloned().collect(),
            relations: self.relations.clone(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    pub fn dialogue_acts(&self) -> impl Iterator<Item = &str> {
        self.dialogue_acts.iter().map(String::as_str)
    }

    pub fn attributes(&self) -> impl Iterator<Item = &AttributeSpec> {
        self.attributes.values()
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.get(name)
    }

    pub fn relations(&self) -> &[RelationSpec] {
        &self.relations
    }

    pub fn relations_for(&self, topic: Topic) -> impl Iterator<Item = &RelationSpec> {
        self.relations.iter().filter(move |r| r.topic == topic)
    }

    /// First relation entry with this name, in file order.
    pub fn relation(&self, name: &str) -> Option<&RelationSpec> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn is_novel(&self, topic: Topic, relation: &str) -> Option<bool> {
        self.relations
            .iter()
            .find(|r| r.topic == topic && r.name == relation)
            .map(|r| r.novel)
    }

    pub fn validate_viggo(&self, mr: &ViggoMr) -> Result<(), MrError> {
        if !self.dialogue_acts.contains(mr.dialogue_act()) {
            return Err(MrError::UnknownDialogueAct(mr.dialogue_act().to_string()));
        }
        for slot in mr.slots() {
            if !self.attributes.contains_key(slot.attribute()) {
                return Err(MrError::UnknownAttribute(slot.attribute().to_string()));
            }
        }
        Ok(())
    }

    /// Checks every relation against the topic's relation list. MRs tagged
    /// `other` only need relations known to some topic.
    pub fn validate_kg(&self, mr: &KgMr) -> Result<(), MrError> {
        for t in mr.triples() {
            let known = match mr.topic() {
                Topic::Other => self.relations.iter().any(|r| r.name == t.relation()),
                topic => self
                    .relations
                    .iter()
                    .any(|r| r.topic == topic && r.name == t.relation()),
            };
            if !known {
                return Err(match mr.topic() {
                    Topic::Other => MrError::UnknownRelation(t.relation().to_string()),
                    topic => MrError::RelationOutsideTopic {
                        relation: t.relation().to_string(),
                        topic,
                    },
                });
            }
        }
        Ok(())
    }

    /// Extends the schema with any dialogue act or attribute a corpus uses
    /// that is not yet listed, inferring a kind for new attributes from the
    /// observed values.
    pub fn close_over<'a>(
        &mut self,
        corpus: impl IntoIterator<Item = &'a ViggoMr>,
    ) -> SchemaAdditions {
        let mut additions = SchemaAdditions::default();
        let mut observed: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for mr in corpus {
            if self.dialogue_acts.insert(mr.dialogue_act().to_string()) {
                additions.dialogue_acts.push(mr.dialogue_act().to_string());
            }
            for slot in mr.slots() {
                if !self.attributes.contains_key(slot.attribute()) {
                    observed
                        .entry(slot.attribute().to_string())
                        .or_default()
                        .extend(slot.values().iter().cloned());
                }
            }
        }
        for (name, values) in observed {
            let kind = infer_kind(&values);
            self.attributes.insert(
                name.clone(),
                AttributeSpec {
                    name: name.clone(),
                    kind,
                    origin: default_origin(),
                },
            );
            additions.attributes.push(name);
        }
        additions
    }
}

fn infer_kind(values: &[String]) -> AttributeKind {
    if values.is_empty() {
        return AttributeKind::FreeText;
    }
    if values.iter().all(|v| v == "yes" || v == "no") {
        AttributeKind::Boolean
    } else if values
        .iter()
        .all(|v| v.len() == 4 && v.chars().all(|c| c.is_ascii_digit()))
    {
        AttributeKind::Year
    } else {
        AttributeKind::FreeText
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::parse_viggo_mr;

    #[test]
    fn builtin_schema_inventory() {
        let schema = MrSchema::builtin();
        assert_eq!(schema.dialogue_acts().count(), 9);
        assert_eq!(schema.attributes().count(), 14);
        let observed: Vec<_> = schema
            .attributes()
            .filter(|a| a.origin == "observed")
            .map(|a| a.name.as_str())
            .collect();
        assert_eq!(observed.len(), 10);
        assert_eq!(
            schema.attribute("has_multiplayer").unwrap().kind,
            AttributeKind::Boolean
        );
    }

    #[test]
    fn novelty_flags() {
        let schema = MrSchema::builtin();
        assert_eq!(schema.is_novel(Topic::Movies, "screen writer"), Some(true));
        assert_eq!(schema.is_novel(Topic::Movies, "cast member"), Some(false));
        assert_eq!(schema.is_novel(Topic::Tv, "narrative location"), Some(true));
        assert_eq!(
            schema.is_novel(Topic::Sports, "significant event"),
            Some(true)
        );
        assert_eq!(schema.is_novel(Topic::Music, "frobnicates"), None);
    }

    #[test]
    fn strict_validation() {
        let schema = MrSchema::builtin();
        let ok = parse_viggo_mr("confirm(name[Portal 2])").unwrap();
        assert!(schema.validate_viggo(&ok).is_ok());
        let bad_da = parse_viggo_mr("shout(name[Portal 2])").unwrap();
        assert_eq!(
            schema.validate_viggo(&bad_da),
            Err(MrError::UnknownDialogueAct("shout".into()))
        );
        let bad_attr = parse_viggo_mr("inform(colour[red])").unwrap();
        assert_eq!(
            schema.validate_viggo(&bad_attr),
            Err(MrError::UnknownAttribute("colour".into()))
        );
    }

    #[test]
    fn kg_topic_membership() {
        let schema = MrSchema::builtin();
        let mr = crate::mr::parse_kg_paren("(Wonder Woman, director, Patty Jenkins)").unwrap();
        assert!(schema.validate_kg(&mr).is_ok());
        assert!(schema
            .validate_kg(&mr.clone().with_topic(Topic::Movies))
            .is_ok());
        assert!(matches!(
            schema.validate_kg(&mr.with_topic(Topic::Music)),
            Err(MrError::RelationOutsideTopic { .. })
        ));
    }

    #[test]
    fn close_over_adds_missing_entries() {
        let mut schema =
            MrSchema::from_toml("version = 1\ndialogue_acts = [\"inform\"]\n").unwrap();
        let corpus = [
            parse_viggo_mr("inform(name[A], has_mac_release[yes])").unwrap(),
            parse_viggo_mr("request(release_year[2014], specifier[interesting])").unwrap(),
        ];
        let added = schema.close_over(corpus.iter());
        assert_eq!(added.dialogue_acts, ["request"]);
        assert_eq!(
            added.attributes,
            ["has_mac_release", "name", "release_year", "specifier"]
        );
        assert_eq!(
            schema.attribute("has_mac_release").unwrap().kind,
            AttributeKind::Boolean
        );
        assert_eq!(
            schema.attribute("release_year").unwrap().kind,
            AttributeKind::Year
        );
        for mr in &corpus {
            schema.validate_viggo(mr).unwrap();
        }
        assert!(schema.close_over(corpus.iter()).is_empty());
    }

    #[test]
    fn toml_round_trip() {
        let schema = MrSchema::builtin();
        assert_eq!(MrSchema::from_toml(&schema.to_toml()).unwrap(), schema);
    }
}
