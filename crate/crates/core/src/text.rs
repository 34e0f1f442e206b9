//! Small text helpers shared by the mock provider and label selection.

use std::collections::BTreeMap;

const STOPWORDS: &[&str] = &[
    "a", "about", "across", "after", "all", "an", "analysis", "analyze", "and", "any", "are", "as", "at",
    "be", "between", "by", "can", "context", "csv", "data", "dataset", "datasets", "do", "during", "each",
    "find", "for", "from", "has", "have", "how", "i", "id", "if", "in", "into", "is", "it", "its", "looking",
    "me", "my", "need", "of", "on", "or", "over", "per", "some", "such", "table", "that", "the", "their",
    "them", "this", "to", "under", "use", "want", "was", "what", "which", "while", "who", "will", "with",
    "within", "would",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercase alphanumeric tokens. Splits on punctuation, whitespace,
/// underscores and lower-to-upper camelCase boundaries.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if ch.is_uppercase() && prev_lower && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = ch.is_lowercase() || ch.is_ascii_digit();
            cur.extend(ch.to_lowercase());
        } else {
            prev_lower = false;
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Tokens that carry topic signal: no stopwords, no pure numbers.
pub fn content_tokens(s: &str) -> Vec<String> {
    tokenize(s)
        .into_iter()
        .filter(|t| !is_stopword(t) && !t.chars().all(|c| c.is_ascii_digit()))
        .collect()
}

/// Most frequent content token across `texts`; ties go to the
/// lexicographically smallest token.
pub fn most_frequent_token<'a>(texts: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for tok in content_tokens(t) {
            if tok.chars().all(|c| c.is_ascii_alphabetic()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(t, _)| t)
}
