use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.toml");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed lexicon: {0}")]
    Format(String),
}

#[derive(Debug, Deserialize)]
struct LexiconFile {
    version: u32,
    #[serde(default, rename = "entry")]
    entries: Vec<EntryFile>,
    #[serde(default, rename = "keyword")]
    keywords: Vec<KeywordFile>,
}

#[derive(Debug, Deserialize)]
struct EntryFile {
    key: String,
    value: String,
    variants: Vec<String>,
    #[serde(default)]
    #[allow(dead_code)]
    provenance: Option<String>,
}

#[derive(Debug, Deserialize)]
struct KeywordFile {
    attribute: String,
    keywords: Vec<String>,
}

/// Acceptable surface variants per (attribute or relation, value), plus
/// keyword rules for empty-valued slots. Lookups are case-folded.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    variants: HashMap<(String, String), Vec<String>>,
    keywords: HashMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_LEXICON).expect("built-in lexicon parses")
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, LexiconError> {
        let file: LexiconFile =
            toml::from_str(text).map_err(|e| LexiconError::Format(e.to_string()))?;
        if file.version != 1 {
            return Err(LexiconError::Format(format!(
                "unsupported lexicon version {}",
                file.version
            )));
        }
        let mut lexicon = Lexicon::default();
        for e in file.entries {
            if e.variants.is_empty() {
                return Err(LexiconError::Format(format!(
                    "entry {}={} has no variants",
                    e.key, e.value
                )));
            }
            lexicon.insert(&e.key, &e.value, e.variants);
        }
        for k in file.keywords {
            if k.keywords.is_empty() {
                return Err(LexiconError::Format(format!(
                    "keyword rule for {} is empty",
                    k.attribute
                )));
            }
            lexicon
                .keywords
                .insert(k.attribute.to_lowercase(), k.keywords);
        }
        Ok(lexicon)
    }

    pub fn insert(&mut self, key: &str, value: &str, variants: Vec<String>) {
        self.variants
            .entry((key.trim().to_lowercase(), value.trim().to_lowercase()))
            .or_default()
            .extend(variants);
    }

    /// Variants registered for `value` under `key`, falling back to the
    /// wildcard key `*`.
    pub fn variants(&self, key: &str, value: &str) -> Option<&[String]> {
        let value = value.trim().to_lowercase();
        self.variants
            .get(&(key.trim().to_lowercase(), value.clone()))
            .or_else(|| self.variants.get(&("*".to_string(), value)))
            .map(Vec::as_slice)
    }

    pub fn keywords(&self, attribute: &str) -> Option<&[String]> {
        self.keywords
            .get(&attribute.trim().to_lowercase())
            .map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_known_variants() {
        let lex = Lexicon::builtin();
        assert!(lex
            .variants("player_perspective", "bird view")
            .unwrap()
            .contains(&"bird's eye view".to_string()));
        assert!(lex
            .variants("RATING", "Poor")
            .unwrap()
            .contains(&"one of the worst".to_string()));
        assert_eq!(lex.keywords("has_multiplayer").unwrap()[0], "multiplayer");
        assert!(lex.variants("rating", "sublime").is_none());
    }

    #[test]
    fn wildcard_key() {
        let mut lex = Lexicon::empty();
        lex.insert("*", "United States of America", vec!["USA".into()]);
        assert_eq!(
            lex.variants("country", "united states of america").unwrap(),
            ["USA"]
        );
    }

    #[test]
    fn rejects_empty_variant_list() {
        let text = "version = 1\n[[entry]]\nkey = \"a\"\nvalue = \"b\"\nvariants = []\n";
        assert!(Lexicon::from_toml(text).is_err());
    }
}
