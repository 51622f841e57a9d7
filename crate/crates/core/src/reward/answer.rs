//! Deterministic extraction of option letters, intervals and event orders
//! from free-form answer text.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

/// First standalone option letter `A`..=`H` (uppercase, not touching
/// another letter or digit).
pub fn extract_option(text: &str) -> Option<char> {
    let chars: Vec<char> = text.chars().collect();
    chars.iter().enumerate().find_map(|(i, &c)| {
        if !('A'..='H').contains(&c) {
            return None;
        }
        let before = i.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i + 1).copied();
        let isolated = |n: Option<char>| n.is_none_or(|n| !n.is_alphanumeric());
        (isolated(before) && isolated(after)).then_some(c)
    })
}

/// First two non-negative reals in the text, read as `start ... end`.
///
/// Brackets, `to` and `-` separators all work because only the numbers are
/// picked out. Reversed pairs are rejected.
pub fn extract_interval(text: &str) -> Option<(f64, f64)> {
    let mut nums = NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().parse::<f64>().ok());
    let start = nums.next()?;
    let end = nums.next()?;
    (start.is_finite() && end.is_finite() && start <= end).then_some((start, end))
}

/// Event labels in the order they appear, restricted to labels of the gold
/// order (compared case-insensitively).
///
/// Tokens are split on anything other than letters, digits, `_` and `-`,
/// then trimmed of `-`, so `1 -> 3 -> 2`, `1,3,2` and `[1; 3; 2]` all read
/// the same.
pub fn extract_order(text: &str, gold: &[String]) -> Vec<String> {
    let known: HashMap<String, &String> = gold.iter().map(|g| (g.to_lowercase(), g)).collect();
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
        .map(|t| t.trim_matches('-'))
        .filter(|t| !t.is_empty())
        .filter_map(|t| known.get(&t.to_lowercase()).map(|g| (*g).clone()))
        .collect()
}
