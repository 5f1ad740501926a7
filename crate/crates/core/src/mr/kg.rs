use super::{KgMr, MrError, Topic, Triple};

const TRIPLE_SEP: &str = " | ";
const FIELD_SEP: &str = " = ";

fn check_pipe_field(value: &str) -> Result<(), MrError> {
    for delimiter in [TRIPLE_SEP, FIELD_SEP] {
        if value.contains(delimiter) {
            return Err(MrError::EscapingRequired {
                value: value.to_string(),
                delimiter: delimiter.to_string(),
            });
        }
    }
    Ok(())
}

fn check_paren_field(value: &str) -> Result<(), MrError> {
    for delimiter in ["(", ")", ","] {
        if value.contains(delimiter) {
            return Err(MrError::EscapingRequired {
                value: value.to_string(),
                delimiter: delimiter.to_string(),
            });
        }
    }
    Ok(())
}

/// `subject = relation = object`, triples joined by `" | "`.
pub fn serialize_kg_s2s(mr: &KgMr) -> Result<String, MrError> {
    let mut parts = Vec::with_capacity(mr.triples().len());
    for t in mr.triples() {
        for field in [t.subject(), t.relation(), t.object()] {
            check_pipe_field(field)?;
        }
        parts.push(format!(
            "{}{FIELD_SEP}{}{FIELD_SEP}{}",
            t.subject(),
            t.relation(),
            t.object()
        ));
    }
    Ok(parts.join(TRIPLE_SEP))
}

/// `(subject, relation, object)` groups joined by `", "`.
pub fn serialize_kg_paren(mr: &KgMr) -> Result<String, MrError> {
    let mut parts = Vec::with_capacity(mr.triples().len());
    for t in mr.triples() {
        for field in [t.subject(), t.relation(), t.object()] {
            check_paren_field(field)?;
        }
        parts.push(format!(
            "({}, {}, {})",
            t.subject(),
            t.relation(),
            t.object()
        ));
    }
    Ok(parts.join(", "))
}

pub fn parse_kg_s2s(text: &str) -> Result<KgMr, MrError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(MrError::syntax(text, "empty MR"));
    }
    let mut triples = Vec::new();
    for group in trimmed.split(TRIPLE_SEP) {
        let fields: Vec<&str> = group.split(FIELD_SEP).collect();
        if fields.len() != 3 {
            return Err(MrError::syntax(
                group,
                format!(
                    "expected `subject = relation = object`, found {} field(s)",
                    fields.len()
                ),
            ));
        }
        let triple = Triple::new(fields[0], fields[1], fields[2])
            .map_err(|e| MrError::syntax(group, e.to_string()))?;
        triples.push(triple);
    }
    KgMr::new(triples, Topic::Other)
}

pub fn parse_kg_paren(text: &str) -> Result<KgMr, MrError> {
    let mut triples = Vec::new();
    let mut rest = text.trim();
    if rest.is_empty() {
        return Err(MrError::syntax(text, "empty MR"));
    }
    loop {
        rest = rest.trim_start();
        let Some(after_open) = rest.strip_prefix('(') else {
            return Err(MrError::syntax(text, "expected `(`"));
        };
        let Some(close) = after_open.find(')') else {
            return Err(MrError::syntax(text, "unbalanced parenthesis"));
        };
        let body = &after_open[..close];
        if body.contains('(') {
            return Err(MrError::syntax(text, "nested parenthesis"));
        }
        if body.trim().is_empty() {
            return Err(MrError::syntax(text, "empty group"));
        }
        let fields: Vec<&str> = body.split(',').collect();
        match fields.len() {
            3 => {}
            n if n > 3 => return Err(MrError::AmbiguousCommaSplit(body.to_string())),
            _ => {
                return Err(MrError::syntax(
                    body,
                    "group needs three comma-separated fields",
                ))
            }
        }
        let triple = Triple::new(fields[0], fields[1], fields[2])
            .map_err(|e| MrError::syntax(body, e.to_string()))?;
        triples.push(triple);

        rest = after_open[close + 1..].trim_start();
        if rest.is_empty() {
            break;
        }
        match rest.strip_prefix(',') {
            Some(r) => rest = r,
            None => return Err(MrError::syntax(text, "expected `,` between groups")),
        }
    }
    KgMr::new(triples, Topic::Other)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kg(triples: &[(&str, &str, &str)]) -> KgMr {
        KgMr::new(
            triples
                .iter()
                .map(|(s, r, o)| Triple::new(s, r, o).unwrap())
                .collect(),
            Topic::Other,
        )
        .unwrap()
    }

    #[test]
    fn s2s_serializes_starship_pair() {
        let mr = kg(&[
            ("Starship", "song", "We Built This City"),
            ("We Built This City", "genre", "pop rock"),
        ]);
        assert_eq!(
            serialize_kg_s2s(&mr).unwrap(),
            "Starship = song = We Built This City | We Built This City = genre = pop rock"
        );
    }

    #[test]
    fn s2s_serializes_single_triple() {
        let mr = kg(&[("Scream", "cast member", "Liev Schreiber")]);
        assert_eq!(
            serialize_kg_s2s(&mr).unwrap(),
            "Scream = cast member = Liev Schreiber"
        );
    }

    #[test]
    fn s2s_rejects_reserved_delimiters() {
        let mr = kg(&[("A = B", "r", "o")]);
        assert!(matches!(
            serialize_kg_s2s(&mr),
            Err(MrError::EscapingRequired { .. })
        ));
        let mr = kg(&[("A", "r", "x | y")]);
        assert!(matches!(
            serialize_kg_s2s(&mr),
            Err(MrError::EscapingRequired { .. })
        ));
    }

    #[test]
    fn paren_parses_two_groups() {
        let mr =
            parse_kg_paren("(The Beach Boys, song, Cotton Fields), (Cotton Fields, date, 1970)")
                .unwrap();
        assert_eq!(mr.triples().len(), 2);
        assert_eq!(mr.triples()[1].object(), "1970");
        assert_eq!(mr.topic(), Topic::Other);
    }

    #[test]
    fn paren_parses_single_group() {
        let mr = parse_kg_paren("(Wonder Woman, director, Patty Jenkins)").unwrap();
        assert_eq!(mr.triples()[0].relation(), "director");
    }

    #[test]
    fn paren_errors() {
        assert!(matches!(parse_kg_paren("()"), Err(MrError::Syntax { .. })));
        assert!(matches!(
            parse_kg_paren("(a, b)"),
            Err(MrError::Syntax { .. })
        ));
        assert!(matches!(
            parse_kg_paren("(Crosby, Stills, Nash, member of, x)"),
            Err(MrError::AmbiguousCommaSplit(_))
        ));
        assert!(matches!(
            parse_kg_paren("(a, b, c"),
            Err(MrError::Syntax { .. })
        ));
        assert!(matches!(
            parse_kg_paren("(a, b, c) (d, e, f)"),
            Err(MrError::Syntax { .. })
        ));
        assert!(matches!(
            parse_kg_paren("(a, b, c),"),
            Err(MrError::Syntax { .. })
        ));
    }

    #[test]
    fn s2s_errors() {
        assert!(matches!(parse_kg_s2s(""), Err(MrError::Syntax { .. })));
        assert!(matches!(
            parse_kg_s2s("name=Babbo | eatType = bistro"),
            Err(MrError::Syntax { .. })
        ));
        assert!(matches!(
            parse_kg_s2s("a =  = c"),
            Err(MrError::Syntax { .. })
        ));
    }
}
