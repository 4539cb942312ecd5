use serde::{Deserialize, Serialize};

/// Half-open byte range `[start, end)` into a document body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Splits `body` into sentence spans.
///
/// A sentence ends at `.`, `!` or `?` when the terminator is followed by
/// whitespace and then an uppercase letter, or by nothing but whitespace up to
/// the end of the text. Abbreviations are not special-cased. Spans exclude
/// surrounding whitespace; trailing text without a terminator forms a final
/// sentence.
pub fn split_sentences(body: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in body.char_indices() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let end = i + c.len_utf8();
        let rest = &body[end..];
        let next_visible = rest.trim_start().chars().next();
        let boundary = match next_visible {
            None => true,
            Some(n) => rest.starts_with(char::is_whitespace) && n.is_uppercase(),
        };
        if boundary {
            if let Some(s) = start.take() {
                spans.push(Span::new(s, end));
            }
        }
    }

    if let Some(s) = start {
        let end = s + body[s..].trim_end().len();
        if end > s {
            spans.push(Span::new(s, end));
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts<'a>(body: &'a str, spans: &[Span]) -> Vec<&'a str> {
        spans.iter().map(|s| &body[s.start..s.end]).collect()
    }

    #[test]
    fn two_sentences_match_hand_split() {
        let body = "Ottawa is the capital of Canada. Kingston was the first capital.\n";
        let spans = split_sentences(body);
        assert_eq!(
            texts(body, &spans),
            ["Ottawa is the capital of Canada.", "Kingston was the first capital."]
        );
        assert_eq!(spans, [Span::new(0, 32), Span::new(33, 64)]);
    }

    #[test]
    fn lowercase_after_period_does_not_split() {
        let body = "It grew to 3.5 million people. then it shrank! Why? Nobody knows";
        let spans = split_sentences(body);
        assert_eq!(
            texts(body, &spans),
            ["It grew to 3.5 million people. then it shrank!", "Why?", "Nobody knows"]
        );
    }

    #[test]
    fn empty_and_whitespace_bodies() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" \n\t ").is_empty());
    }

    #[test]
    fn abbreviations_split_as_documented() {
        let body = "He lived on St. Lawrence Street.";
        assert_eq!(split_sentences(body).len(), 2);
    }
}
