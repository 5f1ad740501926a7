//! Text normalization for slot alignment.

/// Case-folds, maps typographic apostrophes to `'`, drops punctuation except
/// apostrophes and hyphens between two alphanumerics, and collapses
/// whitespace.
pub fn normalize(text: &str) -> String {
    let chars: Vec<char> = text
        .chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' | '`' => '\'',
            '\u{2010}' | '\u{2011}' | '\u{2013}' => '-',
            other => other,
        })
        .collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else if c == '\'' || c == '-' {
            let prev = i
                .checked_sub(1)
                .and_then(|j| chars.get(j))
                .is_some_and(|p| p.is_alphanumeric());
            let next = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            prev && next
        } else {
            false
        };
        if keep {
            out.extend(c.to_lowercase());
        } else {
            out.push(' ');
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Tokens used for phrase matching: normalized text with hyphens treated as
/// token boundaries, so "third-person" and "third person" compare equal.
pub fn match_tokens(text: &str) -> Vec<String> {
    normalize(text)
        .replace('-', " ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Whether `needle` occurs as a contiguous token run in `haystack`.
pub fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn two_digits(n: u32) -> String {
    debug_assert!(n < 100);
    if n < 20 {
        ONES[n as usize].to_string()
    } else if n.is_multiple_of(10) {
        TENS[(n / 10) as usize].to_string()
    } else {
        format!("{} {}", TENS[(n / 10) as usize], ONES[(n % 10) as usize])
    }
}

/// Spelled-out readings of a four-digit year ("1970" → "nineteen seventy").
/// Returns an empty list for anything that is not a year between 1000 and
/// 2999.
pub fn year_words(text: &str) -> Vec<String> {
    let t = text.trim();
    if t.len() != 4 || !t.chars().all(|c| c.is_ascii_digit()) {
        return Vec::new();
    }
    let year: u32 = t.parse().expect("four ascii digits");
    if !(1000..3000).contains(&year) {
        return Vec::new();
    }
    let hi = year / 100;
    let lo = year % 100;
    let mut forms = Vec::new();
    // Paired reading: "nineteen seventy", "twenty nineteen", "nineteen oh five".
    match lo {
        0 => forms.push(format!("{} hundred", two_digits(hi))),
        1..=9 => forms.push(format!("{} oh {}", two_digits(hi), ONES[lo as usize])),
        _ => forms.push(format!("{} {}", two_digits(hi), two_digits(lo))),
    }
    // Cardinal reading for years like 2001: "two thousand one".
    if year % 1000 < 100 {
        let thousands = ONES[(year / 1000) as usize];
        let rest = year % 1000;
        if rest == 0 {
            forms.push(format!("{thousands} thousand"));
        } else {
            forms.push(format!("{thousands} thousand {}", two_digits(rest)));
            forms.push(format!("{thousands} thousand and {}", two_digits(rest)));
        }
    }
    forms
}
