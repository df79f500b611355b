//! Embedded English stopword list (175 entries).
//!
//! The list is fixed and committed so that tokenization and the language
//! heuristic are reproducible without external resources. Single-letter
//! entries never survive the tokenizer's length filter but do count as
//! hits for the language heuristic, which runs on unfiltered tokens.

/// Sorted list of lowercase stopwords. Kept sorted so membership can be
/// resolved with a binary search and the list doubles as documentation.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "ain", "all",
    "also", "although", "am", "an", "and", "any", "are", "aren", "as",
    "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "cannot", "could", "couldn", "d", "did",
    "didn", "do", "does", "doesn", "doing", "don", "down", "during",
    "each", "ever", "few", "for", "from", "further", "had", "hadn",
    "has", "hasn", "have", "haven", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "i", "if", "in",
    "into", "is", "isn", "it", "its", "itself", "just", "let", "ll",
    "m", "me", "might", "mightn", "more", "most", "must", "mustn", "my",
    "myself", "need", "never", "no", "nor", "not", "now", "o", "of",
    "off", "on", "once", "only", "onto", "or", "other", "ought", "our",
    "ours", "ourselves", "out", "over", "own", "per", "re", "s", "same",
    "shall", "shan", "she", "should", "shouldn", "since", "so", "some",
    "such", "t", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those",
    "though", "through", "to", "too", "under", "unless", "until", "up",
    "upon", "ve", "very", "via", "was", "wasn", "we", "were", "weren",
    "what", "when", "where", "whether", "which", "while", "who", "whom",
    "why", "will", "with", "within", "without", "won", "would",
    "wouldn", "y", "yet", "you", "your", "yours", "yourself",
    "yourselves",
];

/// True if `word` (already lowercased) is a stopword.
pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}
