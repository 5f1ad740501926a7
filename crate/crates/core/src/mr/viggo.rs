use super::{MrError, MrSchema, Slot, ViggoMr};

const FIELD_SEP: &str = " | ";

/// Parses `da(attr[v1, v2], attr2[])`. Whitespace around tokens is trimmed;
/// no validation against a schema.
pub fn parse_viggo_mr(text: &str) -> Result<ViggoMr, MrError> {
    let t = text.trim();
    let open = t
        .find('(')
        .ok_or_else(|| MrError::syntax(text, "missing `(` after dialogue act"))?;
    let da = t[..open].trim();
    if da.is_empty() {
        return Err(MrError::syntax(text, "missing dialogue act"));
    }
    if !t.ends_with(')') {
        return Err(MrError::syntax(text, "missing closing `)`"));
    }
    let body = &t[open + 1..t.len() - 1];

    let mut slots = Vec::new();
    for raw in split_top_level(body, text)? {
        let raw = raw.trim();
        if raw.is_empty() {
            if body.trim().is_empty() {
                break;
            }
            return Err(MrError::syntax(text, "empty slot"));
        }
        let lb = raw
            .find('[')
            .ok_or_else(|| MrError::syntax(raw, "slot is missing `[`"))?;
        if !raw.ends_with(']') {
            return Err(MrError::syntax(raw, "slot is missing `]`"));
        }
        let attr = raw[..lb].trim();
        if attr.is_empty() {
            return Err(MrError::syntax(raw, "slot is missing an attribute name"));
        }
        let inner = &raw[lb + 1..raw.len() - 1];
        if inner.contains('[') || inner.contains(']') {
            return Err(MrError::syntax(raw, "unbalanced brackets"));
        }
        let values: Vec<String> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(|v| v.trim().to_string()).collect()
        };
        if values.iter().any(String::is_empty) {
            return Err(MrError::syntax(raw, "empty value in list"));
        }
        slots.push(Slot::new(attr, values).map_err(|e| match e {
            MrError::Empty(what) => MrError::syntax(raw, format!("empty {what}")),
            other => other,
        })?);
    }
    ViggoMr::new(da, slots)
}

/// Splits on commas outside square brackets, rejecting unbalanced brackets.
fn split_top_level<'a>(body: &'a str, whole: &str) -> Result<Vec<&'a str>, MrError> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '[' => {
                depth += 1;
                if depth > 1 {
                    return Err(MrError::syntax(whole, "nested brackets"));
                }
            }
            ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(MrError::syntax(whole, "unbalanced brackets"));
                }
            }
            ',' if depth == 0 => {
                parts.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(MrError::syntax(whole, "unbalanced brackets"));
    }
    parts.push(&body[start..]);
    Ok(parts)
}

pub fn parse_viggo_mr_strict(text: &str, schema: &MrSchema) -> Result<ViggoMr, MrError> {
    let mr = parse_viggo_mr(text)?;
    schema.validate_viggo(&mr)?;
    Ok(mr)
}

/// Canonical structured form: `da(attr[v1, v2], attr2[])`.
pub fn serialize_viggo_mr(mr: &ViggoMr) -> String {
    let slots: Vec<String> = mr
        .slots()
        .iter()
        .map(|s| format!("{}[{}]", s.attribute(), s.values().join(", ")))
        .collect();
    format!("{}({})", mr.dialogue_act(), slots.join(", "))
}

/// Pipe form used in prompts: `da = yes | attr = v1, v2 | empty = `.
pub fn serialize_viggo_qa(mr: &ViggoMr) -> Result<String, MrError> {
    let mut fields = Vec::with_capacity(mr.slots().len() + 1);
    fields.push(format!("{} = yes", mr.dialogue_act()));
    for slot in mr.slots() {
        for v in slot.values() {
            if v.contains(FIELD_SEP) {
                return Err(MrError::EscapingRequired {
                    value: v.clone(),
                    delimiter: FIELD_SEP.into(),
                });
            }
        }
        fields.push(format!(
            "{} = {}",
            slot.attribute(),
            slot.values().join(", ")
        ));
    }
    Ok(fields.join(FIELD_SEP))
}

pub fn parse_viggo_qa(text: &str) -> Result<ViggoMr, MrError> {
    // A trailing empty-valued field may have lost its final space.
    let t = text.trim_start().trim_end_matches(['\n', '\r']);
    if t.trim().is_empty() {
        return Err(MrError::syntax(text, "empty MR"));
    }
    let mut fields = t.split(FIELD_SEP);
    let head = fields.next().unwrap_or_default().trim();
    let da = head
        .strip_suffix("= yes")
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .ok_or_else(|| MrError::syntax(text, "first field must be `<dialogue act> = yes`"))?;

    let mut slots = Vec::new();
    for field in fields {
        let (attr, value) = match field.split_once(" = ") {
            Some((a, v)) => (a, v),
            None => match field.trim_end().strip_suffix(" =") {
                Some(a) => (a, ""),
                None => return Err(MrError::syntax(field, "expected `attribute = value`")),
            },
        };
        let value = value.trim();
        let values: Vec<String> = if value.is_empty() {
            Vec::new()
        } else {
            value.split(", ").map(|v| v.trim().to_string()).collect()
        };
        if values.iter().any(String::is_empty) {
            return Err(MrError::syntax(field, "empty value in list"));
        }
        slots.push(Slot::new(attr, values)?);
    }
    ViggoMr::new(da, slots)
}

pub fn parse_viggo_qa_strict(text: &str, schema: &MrSchema) -> Result<ViggoMr, MrError> {
    let mr = parse_viggo_qa(text)?;
    schema.validate_viggo(&mr)?;
    Ok(mr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(mr: &ViggoMr, attr: &str) -> Vec<String> {
        mr.slot(attr).unwrap().values().to_vec()
    }

    #[test]
    fn parses_confirm_with_spaces_before_brackets() {
        let mr = parse_viggo_mr(
            "confirm(name [Hellblade: Senua's Sacrifice], release_year [2017], developer [Ninja Theory])",
        )
        .unwrap();
        assert_eq!(mr.dialogue_act(), "confirm");
        let attrs: Vec<_> = mr.slots().iter().map(|s| s.attribute()).collect();
        assert_eq!(attrs, ["name", "release_year", "developer"]);
        assert_eq!(values(&mr, "name"), ["Hellblade: Senua's Sacrifice"]);
        assert_eq!(values(&mr, "release_year"), ["2017"]);
        assert_eq!(values(&mr, "developer"), ["Ninja Theory"]);
    }

    #[test]
    fn parses_empty_value_slot() {
        let mr = parse_viggo_mr("request_attribute(has_multiplayer[])").unwrap();
        assert_eq!(mr.dialogue_act(), "request_attribute");
        assert_eq!(mr.slots().len(), 1);
        assert!(mr.slots()[0].values().is_empty());
    }

    #[test]
    fn parses_multi_valued_genres() {
        let mr = parse_viggo_mr(
            "give_opinion(name[SpellForce 3], rating[poor], genres[real-time strategy, role-playing], player_perspective[bird view])",
        )
        .unwrap();
        assert_eq!(mr.slots().len(), 4);
        assert_eq!(
            values(&mr, "genres"),
            ["real-time strategy", "role-playing"]
        );
    }

    #[test]
    fn parses_zero_slots() {
        let mr = parse_viggo_mr("inform()").unwrap();
        assert!(mr.slots().is_empty());
    }

    #[test]
    fn structured_syntax_errors() {
        for bad in [
            "(name[x])",
            "inform",
            "inform(name[x]",
            "inform(name[x)",
            "inform(name x])",
            "inform(name[x]], a[b])",
            "inform(name[[x]])",
            "inform(name[x],, a[b])",
            "inform([x])",
            "inform(name[x, ])",
        ] {
            assert!(
                matches!(parse_viggo_mr(bad), Err(MrError::Syntax { .. })),
                "{bad}"
            );
        }
        assert_eq!(
            parse_viggo_mr("inform(name[a], name[b])"),
            Err(MrError::DuplicateAttribute("name".into()))
        );
    }

    #[test]
    fn qa_serializes_tony_hawk() {
        let mr = parse_viggo_mr(
            "confirm(name[Tony Hawk's Pro Skater 3], release_year[2001], genres[sport])",
        )
        .unwrap();
        assert_eq!(
            serialize_viggo_qa(&mr).unwrap(),
            "confirm = yes | name = Tony Hawk's Pro Skater 3 | release_year = 2001 | genres = sport"
        );
    }

    #[test]
    fn qa_zero_slots_and_multi_values() {
        let mr = parse_viggo_mr("inform()").unwrap();
        assert_eq!(serialize_viggo_qa(&mr).unwrap(), "inform = yes");
        assert_eq!(parse_viggo_qa("inform = yes").unwrap(), mr);

        let mr = parse_viggo_mr(
            "give_opinion(name[SpellForce 3], genres[real-time strategy, role-playing])",
        )
        .unwrap();
        let qa = serialize_viggo_qa(&mr).unwrap();
        assert!(qa.contains("| genres = real-time strategy, role-playing"));
        assert_eq!(parse_viggo_qa(&qa).unwrap(), mr);
    }

    #[test]
    fn qa_empty_value_field() {
        let mr = parse_viggo_mr("request_attribute(has_multiplayer[])").unwrap();
        let qa = serialize_viggo_qa(&mr).unwrap();
        assert_eq!(qa, "request_attribute = yes | has_multiplayer = ");
        assert_eq!(parse_viggo_qa(&qa).unwrap(), mr);
        assert_eq!(parse_viggo_qa(qa.trim_end()).unwrap(), mr);
    }

    #[test]
    fn qa_parses_fig5_line() {
        let mr = parse_viggo_qa("confirm = yes | name = Tony Hawk's Pro Skater 3 | release_year = 2001 | genres = sport")
            .unwrap();
        assert_eq!(
            mr,
            parse_viggo_mr(
                "confirm(name[Tony Hawk's Pro Skater 3], release_year[2001], genres[sport])"
            )
            .unwrap()
        );
    }

    #[test]
    fn qa_syntax_errors() {
        assert!(parse_viggo_qa("").is_err());
        assert!(parse_viggo_qa("name = Portal 2").is_err());
        assert!(parse_viggo_qa("= yes").is_err());
        assert!(parse_viggo_qa("confirm = yes | name").is_err());
    }
}
