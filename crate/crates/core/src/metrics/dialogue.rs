//! Rule-based dialogue-act and question checks. Verdicts are advisory; human
//! labels take precedence in reports.

use serde::{Deserialize, Serialize};

use super::normalize::normalize;
use crate::mr::MeaningRepresentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DaVerdict {
    Match,
    Mismatch,
    Uncertain,
}

/// Dialogue acts whose realization is expected to be a question.
const QUESTION_ACTS: [&str; 5] = [
    "request_attribute",
    "suggest",
    "verify_attribute",
    "request_explanation",
    "request",
];
/// Dialogue acts expected to be declarative.
const DECLARATIVE_ACTS: [&str; 3] = ["inform", "give_opinion", "recommend"];
/// Dialogue acts that license exactly one question in the output.
const QUESTION_LICENSING_ACTS: [&str; 5] = [
    "confirm",
    "suggest",
    "request_attribute",
    "verify_attribute",
    "request_explanation",
];

const CONFIRMATION_FRAMES: [&str; 6] = [
    "do you mean",
    "you're referring",
    "you are referring",
    "you mean",
    "are you talking about",
    "referring to",
];

/// Splits on runs of `.`, `!`, `?` followed by whitespace or end of text.
/// Each sentence keeps its terminal punctuation.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if matches!(bytes[i], b'.' | b'!' | b'?') {
            let mut j = i;
            while j < bytes.len() && matches!(bytes[j], b'.' | b'!' | b'?') {
                j += 1;
            }
            if j == bytes.len() || bytes[j].is_ascii_whitespace() {
                let s = text[start..j].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = j;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// A sentence is a question when its terminal punctuation run contains `?`.
pub fn is_question(sentence: &str) -> bool {
    let trailing: String = sentence
        .chars()
        .rev()
        .take_while(|c| matches!(c, '.' | '!' | '?'))
        .collect();
    trailing.contains('?')
}

pub fn dialogue_act_match(da: &str, text: &str) -> DaVerdict {
    let sents = sentences(text);
    if sents.is_empty() {
        return DaVerdict::Mismatch;
    }
    let questions: Vec<bool> = sents.iter().map(|s| is_question(s)).collect();
    let any_question = questions.iter().any(|&q| q);

    if da == "confirm" {
        let norm = normalize(text);
        let framed = CONFIRMATION_FRAMES.iter().any(|f| norm.contains(f));
        return match (any_question, framed) {
            (true, true) => DaVerdict::Match,
            (false, _) => DaVerdict::Mismatch,
            (true, false) => DaVerdict::Uncertain,
        };
    }
    if QUESTION_ACTS.contains(&da) {
        return if any_question {
            DaVerdict::Match
        } else {
            DaVerdict::Mismatch
        };
    }
    if DECLARATIVE_ACTS.contains(&da) {
        let Some(first_decl) = questions.iter().position(|&q| !q) else {
            return DaVerdict::Mismatch;
        };
        // Questions may only trail the statement.
        return if questions[..first_decl].iter().any(|&q| q) {
            DaVerdict::Uncertain
        } else {
            DaVerdict::Match
        };
    }
    DaVerdict::Uncertain
}

/// Whether the output ends in a question the MR does not call for. KG MRs
/// never license a question; the question-type Viggo acts license one.
pub fn question_added(mr: &MeaningRepresentation, text: &str) -> bool {
    let sents = sentences(text);
    let Some(last) = sents.last() else {
        return false;
    };
    if !is_question(last) {
        return false;
    }
    match mr.dialogue_act() {
        Some(da) if QUESTION_LICENSING_ACTS.contains(&da) => {
            sents.iter().filter(|s| is_question(s)).count() >= 2
        }
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::{parse_kg_s2s, parse_viggo_mr};

    #[test]
    fn sentence_splitting() {
        assert_eq!(
            sentences("Babbo is an outstanding French bistro in NY.  Do you like French food?"),
            [
                "Babbo is an outstanding French bistro in NY.",
                "Do you like French food?"
            ]
        );
        assert_eq!(
            sentences("9.58 seconds. Wow!! Really?"),
            ["9.58 seconds.", "Wow!!", "Really?"]
        );
        assert_eq!(
            sentences("no terminal punctuation"),
            ["no terminal punctuation"]
        );
        assert!(sentences("   ").is_empty());
        assert!(is_question("don't you agree?."));
    }

    #[test]
    fn confirm_with_frame_matches() {
        let text = "Gotcha! So you're referring to the Tony Hawk's Pro Skater 3 sports game, which was released in 2001?";
        assert_eq!(dialogue_act_match("confirm", text), DaVerdict::Match);
        assert_eq!(
            dialogue_act_match("confirm", "Is it Portal 2?"),
            DaVerdict::Uncertain
        );
        assert_eq!(
            dialogue_act_match("confirm", "You mean Portal 2."),
            DaVerdict::Mismatch
        );
    }

    #[test]
    fn empty_text_mismatches() {
        assert_eq!(dialogue_act_match("inform", ""), DaVerdict::Mismatch);
    }

    #[test]
    fn verify_attribute_sample_output() {
        let text = "I recall that you were not that fond of Little Big Adventure. Does single-player gaming on the PlayStation quickly get boring for you?";
        assert_eq!(
            dialogue_act_match("verify_attribute", text),
            DaVerdict::Match
        );
    }

    #[test]
    fn declarative_acts() {
        assert_eq!(
            dialogue_act_match(
                "inform",
                "Control is excellent. Do you think you would like it?"
            ),
            DaVerdict::Match
        );
        assert_eq!(
            dialogue_act_match("inform", "Have you heard of Control?"),
            DaVerdict::Mismatch
        );
        assert_eq!(
            dialogue_act_match("give_opinion", "Like it? I think it is great."),
            DaVerdict::Uncertain
        );
        assert_eq!(
            dialogue_act_match("frobnicate", "Hello."),
            DaVerdict::Uncertain
        );
    }

    #[test]
    fn question_added_rules() {
        let kg = MeaningRepresentation::Kg(
            parse_kg_s2s("Babbo = eatType = bistro | Babbo = food = French").unwrap(),
        );
        assert!(question_added(
            &kg,
            "Babbo is an outstanding French bistro in NY.  Do you like French food?"
        ));
        assert!(!question_added(
            &kg,
            "Babbo is an outstanding French bistro in NY."
        ));

        let confirm =
            MeaningRepresentation::Viggo(parse_viggo_mr("confirm(name[Portal 2])").unwrap());
        assert!(!question_added(&confirm, "Do you mean Portal 2?"));
        assert!(question_added(
            &confirm,
            "Do you mean Portal 2? Have you played it?"
        ));
        assert!(!question_added(&confirm, "Portal 2 it is."));

        let inform =
            MeaningRepresentation::Viggo(parse_viggo_mr("inform(name[Portal 2])").unwrap());
        assert!(question_added(
            &inform,
            "Portal 2 is great. Have you played it?"
        ));
        assert!(!question_added(&inform, ""));
    }
}
