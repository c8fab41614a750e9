//! Parsers for the structured spans agents are told to end their replies
//! with. Models reason before answering, so every parser takes the *last*
//! well-formed span and ignores the prose around it.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::python_agent::PhraseColumnReference;
use crate::tabular::DatasetNumber;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no [[...]] answer marker in reply")]
    MissingAnswerMarker,
    #[error("expected [[True]] or [[False]], got `{0}`")]
    MalformedVerdict(String),
    #[error("no well-formed reference list in reply")]
    MalformedReferenceList,
    #[error("invalid dataset number {0} in reference list")]
    InvalidDatasetNumber(i64),
    #[error("no fenced code block in reply")]
    NoCodeBlock,
}

/// Content of the last `[[...]]` span, trimmed.
pub fn parse_bracketed_answer(text: &str) -> Result<String, ParseError> {
    let close = text.rfind("]]").ok_or(ParseError::MissingAnswerMarker)?;
    let mut open = text[..close]
        .rfind("[[")
        .ok_or(ParseError::MissingAnswerMarker)?;
    // `[[[1, 2]]]` holds the list `[1, 2]`
    while open > 0 && text.as_bytes()[open - 1] == b'[' {
        open -= 1;
    }
    Ok(text[open + 2..close].trim().to_string())
}

pub fn parse_boolean_verdict(text: &str) -> Result<bool, ParseError> {
    let span = parse_bracketed_answer(text).map_err(|_| ParseError::MalformedVerdict(String::new()))?;
    match span.to_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ParseError::MalformedVerdict(span)),
    }
}

const QUOTED: &str = r#"(?:"[^"]*"|'[^']*')"#;

fn list_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let tuple = format!(r"\(\s*{QUOTED}\s*,\s*{QUOTED}\s*,\s*-?\d+\s*\)");
        Regex::new(&format!(
            r"\[\s*(?:{tuple}(?:\s*,\s*{tuple})*\s*,?\s*)?\]"
        ))
        .expect("valid list regex")
    })
}

fn tuple_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"\(\s*(?:"([^"]*)"|'([^']*)')\s*,\s*(?:"([^"]*)"|'([^']*)')\s*,\s*(-?\d+)\s*\)"#,
        )
        .expect("valid tuple regex")
    })
}

/// Last bracketed list of `(phrase, column, dataset_number)` tuples.
pub fn parse_reference_list(text: &str) -> Result<Vec<PhraseColumnReference>, ParseError> {
    let list = list_regex()
        .find_iter(text)
        .last()
        .ok_or(ParseError::MalformedReferenceList)?;
    tuple_regex()
        .captures_iter(list.as_str())
        .map(|c| {
            let phrase = c.get(1).or_else(|| c.get(2)).map_or("", |m| m.as_str());
            let column = c.get(3).or_else(|| c.get(4)).map_or("", |m| m.as_str());
            let n: i64 = c[5]
                .parse()
                .map_err(|_| ParseError::MalformedReferenceList)?;
            let number = DatasetNumber::new(n).map_err(|_| ParseError::InvalidDatasetNumber(n))?;
            Ok(PhraseColumnReference::new(phrase, column, number))
        })
        .collect()
}

fn quote(s: &str) -> String {
    if s.contains('"') && !s.contains('\'') {
        format!("'{s}'")
    } else {
        format!("\"{s}\"")
    }
}

/// Inverse of [`parse_reference_list`] for phrases that do not contain both
/// quote characters.
pub fn format_reference_list(refs: &[PhraseColumnReference]) -> String {
    let items: Vec<String> = refs
        .iter()
        .map(|r| format!("({}, {}, {})", quote(&r.phrase), quote(&r.column), r.dataset_number))
        .collect();
    format!("[{}]", items.join(", "))
}

fn fence_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z0-9_+.-]*[ \t]*\r?\n(.*?)```").expect("valid fence regex"))
}

/// Body of the first fenced code block.
pub fn extract_code_block(text: &str) -> Result<String, ParseError> {
    fence_regex()
        .captures(text)
        .map(|c| c[1].trim_end().to_string())
        .filter(|s| !s.trim().is_empty())
        .ok_or(ParseError::NoCodeBlock)
}
