//! Typed answers and normalization of free-text model output.
//!
//! Normalization rules, applied in order:
//!
//! * trim whitespace, surrounding quotes and trailing punctuation; case-fold;
//!   collapse inner whitespace
//! * numbers: drop hedges (`about`, `approximately`, `~`, ...), currency
//!   symbols, `%` and anything after the first numeric token (units);
//!   thousands separators are commas followed by exactly three digits;
//!   the words `zero` to `twenty` are read as counts
//! * colors: synonyms map onto the 24 canonical names
//! * lists: brackets dropped, split on `,` / `;` / ` and `, each element a number
//! * yes/no: `yes`, `y`, `true` and `no`, `n`, `false`

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::color::ColorName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Number,
    LabelText,
    OrderedNumberList,
    ColorName,
    StyleName,
    Count,
    YesNo,
}

impl AnswerKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, AnswerKind::Number | AnswerKind::OrderedNumberList | AnswerKind::Count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Strict,
    Flex,
}

/// A gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Number(f64),
    Text(String),
    List(Vec<f64>),
    Count(u64),
}

impl Answer {
    /// Canonical text; numbers use `precision` decimals.
    pub fn render(&self, precision: u8) -> String {
        match self {
            Answer::Number(v) => crate::chart::format_value(*v, precision),
            Answer::Text(t) => t.clone(),
            Answer::List(vs) => vs
                .iter()
                .map(|v| crate::chart::format_value(*v, precision))
                .collect::<Vec<_>>()
                .join(", "),
            Answer::Count(n) => n.to_string(),
        }
    }
}

/// Output of [`normalize_answer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Normalized {
    Number(f64),
    Text(String),
    List(Vec<f64>),
    /// Expected a number or list but found none; always graded incorrect.
    Unparseable(String),
}

impl fmt::Display for Normalized {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalized::Number(v) => write!(f, "{v}"),
            Normalized::Text(t) | Normalized::Unparseable(t) => f.write_str(t),
            Normalized::List(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join("; "))
            }
        }
    }
}

const HEDGES: [&str; 8] = [
    "approximately",
    "approx.",
    "approx",
    "about",
    "around",
    "roughly",
    "nearly",
    "almost",
];

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

fn is_edge_junk(c: char) -> bool {
    c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '.' | '!' | '?' | ':' | ';' | ',' | '*' | '“' | '”' | '‘' | '’')
}

/// Trim, strip edge quotes/punctuation, case-fold and collapse whitespace.
pub fn clean_text(raw: &str) -> String {
    let folded = raw.trim().to_lowercase();
    // A leading '.' may start a number such as ".5".
    let inner = folded
        .trim_start_matches(|c| c != '.' && is_edge_junk(c))
        .trim_end_matches(is_edge_junk);
    inner.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Remove commas that separate thousands groups (`1,234,567`).
fn strip_thousands(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == ','
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && i + 3 < chars.len() + 1
            && chars[i + 1..].iter().take(3).filter(|c| c.is_ascii_digit()).count() == 3
            && chars.get(i + 4).is_none_or(|c| !c.is_ascii_digit())
        {
            continue;
        }
        out.push(c);
    }
    out
}

/// First numeric token of `s`, if any.
pub fn parse_number(s: &str) -> Option<f64> {
    let mut text = clean_text(s).replace('\u{2212}', "-");
    for h in HEDGES {
        if let Some(rest) = text.strip_prefix(h) {
            text = rest.trim_start().to_string();
        }
    }
    let text = strip_thousands(&text);
    if let Some(i) = NUMBER_WORDS.iter().position(|w| *w == text) {
        return Some(i as f64);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let starts = c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.'));
        if starts {
            let mut j = i + 1;
            let mut seen_dot = c == '.';
            while j < chars.len() {
                let d = chars[j];
                if d.is_ascii_digit() {
                    j += 1;
                } else if d == '.' && !seen_dot && chars.get(j + 1).is_some_and(|e| e.is_ascii_digit()) {
                    seen_dot = true;
                    j += 1;
                } else {
                    break;
                }
            }
            let token: String = chars[i..j].iter().collect();
            return token.parse::<f64>().ok().map(|v| if v == 0.0 { 0.0 } else { v });
        }
        i += 1;
    }
    None
}

fn parse_list(raw: &str) -> Option<Vec<f64>> {
    let text = clean_text(raw);
    let text = text.trim_matches(|c| matches!(c, '[' | ']' | '(' | ')' | '{' | '}'));
    let text = strip_thousands(text).replace(" and ", ",");
    let mut out = Vec::new();
    for part in text.split([',', ';']) {
        if part.trim().is_empty() {
            continue;
        }
        out.push(parse_number(part)?);
    }
    (!out.is_empty()).then_some(out)
}

/// Normalize a raw answer for grading against an answer of `kind`.
pub fn normalize_answer(raw: &str, kind: AnswerKind) -> Normalized {
    match kind {
        AnswerKind::Number | AnswerKind::Count => match parse_number(raw) {
            Some(v) => Normalized::Number(v),
            None => Normalized::Unparseable(clean_text(raw)),
        },
        AnswerKind::OrderedNumberList => match parse_list(raw) {
            Some(v) => Normalized::List(v),
            None => Normalized::Unparseable(clean_text(raw)),
        },
        AnswerKind::ColorName => {
            let mut t = clean_text(raw);
            while let Some(rest) = t.strip_suffix("color") {
                t = clean_text(rest);
            }
            match ColorName::parse(&t) {
                Some(c) => Normalized::Text(c.as_str().to_string()),
                None => Normalized::Text(t),
            }
        }
        AnswerKind::YesNo => {
            let t = clean_text(raw);
            let first = t.split([' ', ',']).next().unwrap_or("");
            match first {
                "yes" | "y" | "true" => Normalized::Text("yes".into()),
                "no" | "n" | "false" => Normalized::Text("no".into()),
                _ => Normalized::Text(t),
            }
        }
        AnswerKind::LabelText | AnswerKind::StyleName => Normalized::Text(clean_text(raw)),
    }
}
