//! Text preprocessing: tokenization/normalization and regex extraction of
//! microtext semantics (hashtags, mentions, links, retweet prefix).

use std::sync::LazyLock;

use regex::Regex;

use crate::porter;
use crate::stopwords::is_stopword;

static HASHTAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"#([A-Za-z0-9_]+)").unwrap());
static MENTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@([A-Za-z0-9_]+)").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"https?://[^\s]+").unwrap());
static RT_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[Rr][Tt]\s+@").unwrap());

/// Microtext markers extracted from the raw text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Semantics {
    pub is_retweet: bool,
    /// Mention handles, lowercased, `@` stripped, in match order.
    pub mentions: Vec<String>,
    /// Hashtag bodies, lowercased, `#` stripped, in match order.
    pub hashtags: Vec<String>,
    /// Links, kept verbatim, in match order.
    pub links: Vec<String>,
}

/// Apply the marker patterns to raw text. Duplicates are preserved.
pub fn extract_semantics(text: &str) -> Semantics {
    Semantics {
        is_retweet: RT_PREFIX.is_match(text),
        mentions: MENTION
            .captures_iter(text)
            .map(|c| c[1].to_lowercase())
            .collect(),
        hashtags: HASHTAG
            .captures_iter(text)
            .map(|c| c[1].to_lowercase())
            .collect(),
        links: URL.find_iter(text).map(|m| m.as_str().to_string()).collect(),
    }
}

/// Normalization pipeline: strip links, the `RT @` prefix, hashtags and
/// mentions (marker plus body), then lowercase, split on non-alphanumeric
/// runs, drop tokens shorter than 2 chars, drop stopwords, and stem.
///
/// Output preserves text order; duplicate tokens are preserved.
pub fn tokenize_normalize(text: &str) -> Vec<String> {
    let stripped = URL.replace_all(text, " ");
    // Keep the `@` so the mention pattern also consumes the handle.
    let stripped = RT_PREFIX.replace(&stripped, "@");
    let stripped = HASHTAG.replace_all(&stripped, " ");
    let stripped = MENTION.replace_all(&stripped, " ");
    let lowered = stripped.to_lowercase();

    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .filter(|t| !is_stopword(t))
        .map(porter::stem)
        .collect()
}

/// Tokens for the language heuristic: plain lowercase alphanumeric runs,
/// no length filter, no stopword removal, no stemming.
pub fn plain_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}
