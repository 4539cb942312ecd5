//! Shared tokenization helpers.

use std::ops::Range;

/// Words suppressed when they open a sentence with a capital letter, and
/// ignored as retrieval query terms.
pub(crate) const STOPWORDS: [&str; 50] = [
    "a", "about", "after", "although", "an", "and", "are", "as", "at", "be", "because", "been",
    "before", "but", "by", "during", "for", "from", "he", "her", "his", "however", "if", "in",
    "into", "is", "it", "its", "many", "of", "on", "or", "she", "since", "that", "the", "their",
    "there", "these", "they", "this", "those", "to", "today", "under", "was", "we", "were", "when",
    "while",
];

pub(crate) fn is_stopword(word: &str) -> bool {
    let lower = word.to_lowercase();
    STOPWORDS.binary_search(&lower.as_str()).is_ok()
}

/// Word tokens with byte ranges into `text`.
///
/// A token is a run of alphanumeric characters; `.` and `-` are kept when
/// they sit between two alphanumerics ("U.S.S.R", "Niagara-on-the-Lake").
pub(crate) fn word_tokens(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            if c.is_alphanumeric() {
                j += 1;
            } else if (c == '.' || c == '-')
                && j + 1 < chars.len()
                && chars[j + 1].1.is_alphanumeric()
            {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
        out.push(start..end);
        i = j;
    }
    out
}

/// Lowercased alphanumeric terms, splitting on every other character.
pub(crate) fn terms(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}
