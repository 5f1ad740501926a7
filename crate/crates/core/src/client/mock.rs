//! Offline backend that answers with template realizations (KG) or a
//! slot-faithful sentence (Viggo) for the prompt's final MR line.

use super::{Backend, BackendError, CompletionParams};
use crate::metrics::Lexicon;
use crate::mr::{KgMr, MeaningRepresentation, Slot, ViggoMr};
use crate::prompt::{final_mr_line, QaMarkers};
use crate::realizer::{realize, TemplateBank};
use crate::util::derive_seed;

pub struct MockBackend {
    id: String,
    bank: TemplateBank,
    lexicon: Lexicon,
    markers: QaMarkers,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new("mock", TemplateBank::builtin(), Lexicon::builtin())
    }
}

impl MockBackend {
    pub fn new(id: &str, bank: TemplateBank, lexicon: Lexicon) -> Self {
        MockBackend {
            id: id.to_string(),
            bank,
            lexicon,
            markers: QaMarkers::default(),
        }
    }

    pub fn with_markers(mut self, markers: QaMarkers) -> Self {
        self.markers = markers;
        self
    }

    /// The candidate list for an already-parsed MR.
    pub fn respond(&self, mr: &MeaningRepresentation, seed: u64, n: usize) -> Vec<String> {
        (0..n.max(1) as u64)
            .map(|i| match mr {
                MeaningRepresentation::Kg(kg) => self.kg_sentence(kg, seed.wrapping_add(i)),
                MeaningRepresentation::Viggo(v) => viggo_sentence(v, &self.lexicon),
            })
            .collect()
    }

    fn kg_sentence(&self, mr: &KgMr, seed: u64) -> String {
        realize(mr, &self.bank, seed).unwrap_or_else(|_| {
            mr.triples()
                .iter()
                .map(|t| format!("The {} of {} is {}.", t.relation(), t.subject(), t.object()))
                .collect::<Vec<_>>()
                .join(" ")
        })
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete_raw(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Vec<String>, BackendError> {
        let line = final_mr_line(prompt, &self.markers)
            .ok_or_else(|| BackendError::UnparsableTestMr(String::new()))?;
        let mr = MeaningRepresentation::parse_any(line)
            .map_err(|_| BackendError::UnparsableTestMr(line.to_string()))?;
        Ok(self.respond(&mr, derive_seed(0, prompt), params.num_candidates as usize))
    }
}

fn join_values(values: &[String]) -> String {
    match values {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn is_boolean(slot: &Slot) -> bool {
    matches!(slot.values(), [v] if v.eq_ignore_ascii_case("yes") || v.eq_ignore_ascii_case("no"))
}

fn phrase(slot: &Slot, lexicon: &Lexicon) -> String {
    let attr = slot.attribute();
    let values = join_values(slot.values());
    if is_boolean(slot) {
        if let Some(v) = lexicon
            .variants(attr, &slot.values()[0])
            .and_then(|v| v.first())
        {
            return match attr {
                "has_multiplayer" => format!("with {v} mode"),
                _ => v.clone(),
            };
        }
        return format!("with {} {}", attr.replace('_', " "), values);
    }
    match attr {
        "release_year" => format!("released in {values}"),
        "developer" => format!("developed by {values}"),
        "rating" => format!("rated {values}"),
        "player_perspective" => format!("played from a {values} perspective"),
        "platforms" => format!("on {values}"),
        "esrb" => format!("rated {values} by the ESRB"),
        "exp_release_date" => format!("expected to come out {values}"),
        other => format!("with {} {}", other.replace('_', " "), values),
    }
}

fn empty_slot_question(attr: &str) -> String {
    match attr {
        "has_multiplayer" => "Do you like multiplayer games?".into(),
        "genres" => "What genre of games do you like?".into(),
        "player_perspective" => "What perspective do you prefer in games?".into(),
        "platforms" => "What platform do you play on?".into(),
        "release_year" => "Do you prefer games released recently?".into(),
        "developer" => "Do you have a favorite developer?".into(),
        "rating" => "How would you rate it?".into(),
        "esrb" => "Does the ESRB rating matter to you?".into(),
        "available_on_steam" => "Do you play games on Steam?".into(),
        "has_linux_release" => "Do you play games on Linux?".into(),
        "has_mac_release" => "Do you play games on a Mac?".into(),
        other => format!("What about its {}?", other.replace('_', " ")),
    }
}

/// Canonical sentence realizing every slot of a Viggo MR, shaped by its
/// dialogue act.
pub fn viggo_sentence(mr: &ViggoMr, lexicon: &Lexicon) -> String {
    let slots = mr.slots();
    let filled: Vec<&Slot> = slots.iter().filter(|s| !s.values().is_empty()).collect();
    let empty: Vec<&Slot> = slots.iter().filter(|s| s.values().is_empty()).collect();

    let name = mr
        .slot("name")
        .map(|s| join_values(s.values()))
        .filter(|n| !n.is_empty());
    let mut head = String::from("game");
    if let Some(g) = mr.slot("genres").filter(|s| !s.values().is_empty()) {
        head = format!("{} {head}", join_values(g.values()));
    }
    if let Some(s) = mr.slot("specifier").filter(|s| !s.values().is_empty()) {
        head = format!("{} {head}", join_values(s.values()));
    }
    let article = if head.starts_with(['a', 'e', 'i', 'o', 'u', 'A', 'E', 'I', 'O', 'U']) {
        "an"
    } else {
        "a"
    };
    let clauses: Vec<String> = filled
        .iter()
        .filter(|s| !matches!(s.attribute(), "name" | "genres" | "specifier"))
        .map(|s| phrase(s, lexicon))
        .collect();
    let detail = if clauses.is_empty() {
        String::new()
    } else {
        format!(" {}", join_values(&clauses))
    };
    let subject = name.clone().unwrap_or_else(|| "it".into());
    let described = format!("{article} {head}{detail}");
    let questions: Vec<String> = empty
        .iter()
        .map(|s| empty_slot_question(s.attribute()))
        .collect();

    let main = match mr.dialogue_act() {
        "confirm" => format!("Do you mean {subject}, {described}?"),
        "suggest" => format!("Do you also enjoy playing {described}, such as {subject}?"),
        "verify_attribute" => format!("Do you like {subject}, {described}?"),
        "request_explanation" => format!("What is it about {subject}, {described}, that you like?"),
        "request_attribute" | "request" if filled.is_empty() => String::new(),
        "request_attribute" | "request" => {
            format!("Are you looking for {described}, like {subject}?")
        }
        "give_opinion" => format!("I think {subject} is {described}."),
        "recommend" => format!("You should try {subject}, {described}."),
        _ => format!("{} is {described}.", capitalize(&subject)),
    };
    let mut parts = Vec::new();
    if !main.is_empty() {
        parts.push(main);
    }
    parts.extend(questions);
    if parts.is_empty() {
        parts.push("Let's talk about video games.".into());
    }
    parts.join(" ")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}
