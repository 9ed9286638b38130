//! Ordering keys for literal values.
//!
//! Numbers compare by value. ISO dates (`YYYY`, `YYYY-MM`, `YYYY-MM-DD`,
//! optionally followed by a time part) map onto fractional years so that a
//! bare year and a full date of that year stay comparable. Anything else
//! has no key and is ignored by ordering operators.

use std::sync::LazyLock;

use regex::Regex;

static DECIMAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$").unwrap());
static DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(-?\d{4})-(\d{2})(-(\d{2}))?(T[0-9:.]+(Z|[+-]\d{2}:\d{2})?)?$").unwrap());

pub fn is_decimal(text: &str) -> bool {
    DECIMAL.is_match(text)
}

pub fn numeric_key(text: &str) -> Option<f64> {
    if DECIMAL.is_match(text) {
        return text.parse::<f64>().ok().filter(|v| v.is_finite());
    }
    let caps = DATE.captures(text)?;
    let year: f64 = caps[1].parse().ok()?;
    let month: f64 = caps[2].parse().ok()?;
    let day: f64 = caps.get(4).map_or(Some(1.0), |d| d.as_str().parse().ok())?;
    if !(1.0..=12.0).contains(&month) || !(1.0..=31.0).contains(&day) {
        return None;
    }
    Some(year + (month - 1.0) / 12.0 + (day - 1.0) / 372.0)
}
