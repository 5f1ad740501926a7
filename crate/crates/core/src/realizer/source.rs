//! Sources of triple groups for corpus generation.

use std::collections::BTreeMap;
use std::path::Path;

use super::template::Template;
use super::RealizerError;
use crate::mr::{Topic, Triple};

/// Yields candidate triple groups for a template's relation signature.
pub trait TripleSource {
    /// Every triple group (in a stable order) that fits the template's
    /// signature and link structure.
    fn groups_for(&self, template: &Template) -> Vec<Vec<Triple>>;
    /// Short description recorded in corpus manifests.
    fn provenance(&self) -> String;
}

fn anchor<'a>(chain: &'a [Triple], link: &str) -> &'a str {
    let (is_subject, n) = match link.split_once('_') {
        Some(("subject", n)) => (true, n),
        Some(("object", n)) => (false, n),
        _ => (true, "1"),
    };
    let t = &chain[n.parse::<usize>().unwrap_or(1) - 1];
    if is_subject {
        t.subject()
    } else {
        t.object()
    }
}

/// Triples loaded from a TSV file with columns
/// `topic, subject, relation, object, subject_id, object_id` (IDs may be
/// empty). Multi-relation groups are formed by joining on the template links.
#[derive(Debug, Clone)]
pub struct FileTripleSource {
    path: String,
    by_key: BTreeMap<(Topic, String), Vec<Triple>>,
}

impl FileTripleSource {
    pub fn load(path: &Path) -> Result<Self, RealizerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RealizerError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, label: &str) -> Result<Self, RealizerError> {
        let mut by_key: BTreeMap<(Topic, String), Vec<Triple>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let malformed = |reason: String| RealizerError::SourceFormat {
                source_name: label.to_string(),
                line: i + 1,
                reason,
            };
            if cols.len() < 4 {
                return Err(malformed(format!(
                    "expected at least 4 columns, got {}",
                    cols.len()
                )));
            }
            let topic: Topic = cols[0]
                .parse()
                .map_err(|e: crate::mr::MrError| malformed(e.to_string()))?;
            let id = |j: usize| {
                cols.get(j)
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
            };
            let triple = Triple::new(cols[1], cols[2], cols[3])
                .map_err(|e| malformed(e.to_string()))?
                .with_ids(id(4), id(5));
            by_key
                .entry((topic, triple.relation().to_string()))
                .or_default()
                .push(triple);
        }
        Ok(FileTripleSource {
            path: label.to_string(),
            by_key,
        })
    }

    fn triples(&self, topic: Topic, relation: &str) -> &[Triple] {
        self.by_key
            .get(&(topic, relation.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

impl TripleSource for FileTripleSource {
    fn groups_for(&self, template: &Template) -> Vec<Vec<Triple>> {
        let mut chains: Vec<Vec<Triple>> = self
            .triples(template.topic, &template.relations[0])
            .iter()
            .map(|t| vec![t.clone()])
            .collect();
        for (i, relation) in template.relations.iter().enumerate().skip(1) {
            let link = template
                .links
                .get(i - 1)
                .map(String::as_str)
                .unwrap_or("subject_1");
            let next = self.triples(template.topic, relation);
            let mut extended = Vec::new();
            for chain in &chains {
                let subject = anchor(chain, link);
                for t in next
                    .iter()
                    .filter(|t| t.subject() == subject && !chain.contains(t))
                {
                    let mut c = chain.clone();
                    c.push(t.clone());
                    extended.push(c);
                }
            }
            chains = extended;
        }
        chains
    }

    fn provenance(&self) -> String {
        format!("file:{}", self.path)
    }
}

const FIRST_NAMES: [&str; 24] = [
    "Ada", "Bruno", "Celia", "Dario", "Elena", "Felix", "Greta", "Hugo", "Iris", "Jonah", "Kira",
    "Leon", "Mara", "Nico", "Olga", "Pavel", "Quinn", "Rosa", "Silas", "Tessa", "Umar", "Vera",
    "Wade", "Yara",
];
const LAST_NAMES: [&str; 24] = [
    "Abbott",
    "Brennan",
    "Castillo",
    "Delaney",
    "Eriksen",
    "Fairbanks",
    "Gallagher",
    "Hollis",
    "Ingram",
    "Jaworski",
    "Kessler",
    "Lindqvist",
    "Moreau",
    "Novak",
    "Okafor",
    "Pemberton",
    "Quintero",
    "Ramsey",
    "Sorensen",
    "Thorne",
    "Upton",
    "Valdez",
    "Whitlock",
    "Yamada",
];
const ADJECTIVES: [&str; 20] = [
    "Silent",
    "Crimson",
    "Hollow",
    "Golden",
    "Broken",
    "Distant",
    "Midnight",
    "Electric",
    "Frozen",
    "Hidden",
    "Iron",
    "Lonely",
    "Northern",
    "Painted",
    "Restless",
    "Scarlet",
    "Shattered",
    "Velvet",
    "Wandering",
    "Wild",
];
const NOUNS: [&str; 20] = [
    "Harbor", "Canyon", "Lantern", "Orchard", "Empire", "Signal", "Horizon", "Garden", "Circuit",
    "Meadow", "Tide", "Engine", "Frontier", "Mirror", "Compass", "Valley", "Anthem", "Station",
    "Kingdom", "River",
];
const MOVIE_GENRES: [&str; 8] = [
    "science fiction film",
    "drama film",
    "comedy film",
    "horror film",
    "thriller film",
    "western film",
    "musical film",
    "documentary film",
];
const MUSIC_GENRES: [&str; 8] = [
    "pop rock",
    "country music",
    "jazz",
    "soul music",
    "hip hop",
    "folk rock",
    "synth-pop",
    "blues",
];
const TV_GENRES: [&str; 8] = [
    "sitcom",
    "police procedural",
    "drama television series",
    "science fiction television series",
    "reality television",
    "medical drama",
    "teen drama",
    "animated series",
];
const AWARDS: [&str; 8] = [
    "Golden Lantern Award",
    "Silver Compass Prize",
    "Northern Star Medal",
    "Critics' Circle Award",
    "Festival Grand Prize",
    "Lifetime Achievement Award",
    "Rising Talent Award",
    "Iron Anchor Trophy",
];
const LABELS: [&str; 6] = [
    "Harborlight Records",
    "Blue Meadow Music",
    "Signal Street Records",
    "Northbound Sound",
    "Velvet Tide Records",
    "Old Engine Records",
];
const TEAMS: [&str; 8] = [
    "Riverton Hawks",
    "Lakeside Rovers",
    "Capital Comets",
    "Granite Bears",
    "Harbor City Tides",
    "Summit Wolves",
    "Prairie Kings",
    "Coastal Giants",
];
const POSITIONS: [&str; 8] = [
    "quarterback",
    "goalkeeper",
    "point guard",
    "pitcher",
    "center",
    "striker",
    "end",
    "shortstop",
];

/// Mixed-radix name from two word lists, with a numeric suffix once the
/// combinations run out.
fn combo(a: &[&str], b: &[&str], i: usize, sep: &str, prefix: &str) -> String {
    let base = a.len() * b.len();
    let (round, j) = (i / base, i % base);
    let core = format!("{prefix}{}{sep}{}", a[j % a.len()], b[j / a.len()]);
    if round == 0 {
        core
    } else {
        format!("{core} {}", round + 1)
    }
}

fn person(i: usize) -> String {
    let base = FIRST_NAMES.len() * LAST_NAMES.len();
    let j = i % base;
    let first = FIRST_NAMES[j % FIRST_NAMES.len()];
    let last = LAST_NAMES[j / FIRST_NAMES.len()];
    match i / base {
        0 => format!("{first} {last}"),
        r => format!("{first} {} {last}", char::from(b'A' + ((r - 1) % 26) as u8)),
    }
}

fn title(i: usize) -> String {
    combo(&ADJECTIVES, &NOUNS, i, " ", "The ")
}

fn band(i: usize) -> String {
    combo(&NOUNS, &ADJECTIVES, i, " of the ", "")
}

fn song(i: usize) -> String {
    combo(&ADJECTIVES, &NOUNS, i, " ", "")
}

/// Deterministic combinatorial triple groups: `per_category` groups for each
/// template signature, with invented entity names.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    pub per_category: usize,
}

impl SyntheticSource {
    pub fn new(per_category: usize) -> Self {
        SyntheticSource { per_category }
    }

    fn subject(topic: Topic, i: usize) -> String {
        match topic {
            Topic::Movies => title(i),
            Topic::Music => band(i),
            Topic::Sports => person(i),
            Topic::Tv => format!("{} Chronicles", title(i).trim_start_matches("The ")),
            Topic::Other => format!("Entity {i}"),
        }
    }

    fn object(topic: Topic, relation: &str, i: usize, slot: usize) -> String {
        let k = i.wrapping_mul(7).wrapping_add(slot * 3);
        match relation {
            "cast member" | "spouse" | "performer" | "director" => person(i * 3 + slot + 1),
            "genre" => match topic {
                Topic::Music => MUSIC_GENRES[k % MUSIC_GENRES.len()].to_string(),
                Topic::Tv => TV_GENRES[k % TV_GENRES.len()].to_string(),
                _ => MOVIE_GENRES[k % MOVIE_GENRES.len()].to_string(),
            },
            "award" => AWARDS[k % AWARDS.len()].to_string(),
            "number of children" => (1 + i % 6).to_string(),
            "song" => song(i),
            "record label" => LABELS[k % LABELS.len()].to_string(),
            "member of sports team" => TEAMS[k % TEAMS.len()].to_string(),
            "position played on team/specialty" => POSITIONS[k % POSITIONS.len()].to_string(),
            "date" => (1960 + i % 60).to_string(),
            _ => format!("{relation} value {i}"),
        }
    }
}

impl TripleSource for SyntheticSource {
    fn groups_for(&self, template: &Template) -> Vec<Vec<Triple>> {
        let mut out = Vec::with_capacity(self.per_category);
        for i in 0..self.per_category {
            let mut chain: Vec<Triple> = Vec::with_capacity(template.relations.len());
            for (slot, relation) in template.relations.iter().enumerate() {
                let subject = if slot == 0 {
                    Self::subject(template.topic, i)
                } else {
                    anchor(
                        &chain,
                        template
                            .links
                            .get(slot - 1)
                            .map(String::as_str)
                            .unwrap_or("subject_1"),
                    )
                    .to_string()
                };
                let mut object = Self::object(template.topic, relation, i, slot);
                // Repeated relations (e.g. two genres) need distinct objects.
                let mut bump = 1;
                while chain
                    .iter()
                    .any(|t| t.relation() == relation && t.object() == object)
                {
                    object = Self::object(template.topic, relation, i, slot + bump);
                    bump += 1;
                }
                chain.push(
                    Triple::new(&subject, relation, &object)
                        .expect("synthetic labels are non-empty"),
                );
            }
            out.push(chain);
        }
        out
    }

    fn provenance(&self) -> String {
        format!("synthetic:{}-per-category", self.per_category)
    }
}
