use std::sync::LazyLock;

use regex::Regex;

use super::LlmError;

static MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:\(?\d+[.):\]]|\d+\s*-\s|[-*•·]|#+|(?i:q(?:uestion)?\s*\d+\s*[.:)]))\s*").unwrap()
});
static NUMBERED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\(?\d+[.):\]]|(?i:q(?:uestion)?\s*\d+\s*[.:)]))").unwrap());

const QUOTES: &[char] = &['"', '\'', '`', '“', '”', '‘', '’', '«', '»'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedList {
    pub items: Vec<String>,
    /// How many items short of `expected` the output was.
    pub short_by: usize,
}

/// Strips list markers and surrounding quotes until nothing changes.
fn clean(line: &str) -> String {
    let mut s = line.trim();
    loop {
        let before = s;
        if let Some(m) = MARKER.find(s) {
            s = s[m.end()..].trim();
        }
        if s.len() >= 2 && s.starts_with(QUOTES) && s.ends_with(QUOTES) {
            let first = s.chars().next().unwrap();
            let last = s.chars().next_back().unwrap();
            s = s[first.len_utf8()..s.len() - last.len_utf8()].trim();
        }
        if s == before {
            return s.to_owned();
        }
    }
}

/// Every item in list-style output, without truncation.
pub fn list_items(text: &str) -> Result<Vec<String>, LlmError> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let numbered = lines.iter().any(|l| NUMBERED.is_match(l));
    let items: Vec<String> = lines
        .into_iter()
        .filter(|l| !numbered || NUMBERED.is_match(l))
        .map(clean)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(LlmError::Unparseable);
    }
    Ok(items)
}

/// Splits list-style model output into items.
///
/// When any line is numbered, unnumbered lines are treated as preamble or
/// commentary and dropped. At most `expected` items are returned.
pub fn parse_numbered_list(text: &str, expected: usize) -> Result<ParsedList, LlmError> {
    let mut items = list_items(text)?;
    items.truncate(expected);
    let short_by = expected.saturating_sub(items.len());
    if short_by > 0 {
        tracing::warn!(expected, got = items.len(), "model returned fewer list items than requested");
    }
    Ok(ParsedList { items, short_by })
}
