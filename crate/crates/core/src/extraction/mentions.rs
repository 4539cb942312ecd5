use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{normalize_entity, Lexicon};
use crate::corpus::{Document, Span};
use crate::text::{is_stopword, word_tokens};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub canonical_id: String,
    pub doc_id: String,
    pub sentence_index: usize,
    pub span: Span,
}

/// Candidate spans within one sentence, in sentence-relative byte offsets.
fn candidates(sentence: &str, lexicon: &Lexicon) -> Vec<Span> {
    let toks = word_tokens(sentence);
    let lower: Vec<String> = toks.iter().map(|r| sentence[r.clone()].to_lowercase()).collect();
    let mut out = Vec::new();

    for i in 0..toks.len() {
        if let Some(n) = lexicon.gazetteer.longest_match(&lower[i..]) {
            out.push(Span::new(toks[i].start, toks[i + n - 1].end));
        }
    }

    let capitalized = |i: usize| {
        sentence[toks[i].clone()]
            .chars()
            .next()
            .is_some_and(char::is_uppercase)
    };
    let mut i = 0;
    while i < toks.len() {
        if !capitalized(i) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < toks.len()
            && capitalized(j)
            && sentence[toks[j - 1].end..toks[j].start].trim().is_empty()
        {
            j += 1;
        }
        let mut first = i;
        if i == 0 && is_stopword(&sentence[toks[0].clone()]) {
            first += 1;
        }
        if first < j {
            out.push(Span::new(toks[first].start, toks[j - 1].end));
        }
        i = j;
    }
    out
}

/// Keeps the longest candidates first, dropping any that overlap an already
/// accepted one. Result is sorted by start.
fn resolve_overlaps(mut cands: Vec<Span>) -> Vec<Span> {
    cands.sort_by_key(|s| (std::cmp::Reverse(s.len()), s.start));
    let mut accepted: Vec<Span> = Vec::new();
    for c in cands {
        if !accepted.iter().any(|a| a.overlaps(&c)) {
            accepted.push(c);
        }
    }
    accepted.sort();
    accepted
}

/// Finds gazetteer matches and capitalized-token runs in every sentence.
///
/// Sentence-initial stopwords are dropped from capitalized runs. Overlaps
/// resolve longest-match-first; output is sorted by span start.
pub fn extract_mentions(doc: &Document, lexicon: &Lexicon) -> Vec<EntityMention> {
    let mut mentions = Vec::new();
    for (idx, sent) in doc.sentence_spans.iter().enumerate() {
        let text = doc.text(*sent);
        for local in resolve_overlaps(candidates(text, lexicon)) {
            let span = Span::new(sent.start + local.start, sent.start + local.end);
            let surface = doc.text(span);
            let Ok(canonical_id) = normalize_entity(surface, &lexicon.aliases) else {
                continue;
            };
            mentions.push(EntityMention {
                surface: surface.to_string(),
                canonical_id,
                doc_id: doc.doc_id.clone(),
                sentence_index: idx,
                span,
            });
        }
    }
    mentions
}

/// Indices of sentences holding at least two distinct canonical entities.
pub fn select_sentences(doc: &Document, mentions: &[EntityMention]) -> Vec<usize> {
    let mut per_sentence: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    for m in mentions.iter().filter(|m| m.doc_id == doc.doc_id) {
        per_sentence
            .entry(m.sentence_index)
            .or_default()
            .insert(&m.canonical_id);
    }
    per_sentence
        .into_iter()
        .filter(|(_, ids)| ids.len() >= 2)
        .map(|(i, _)| i)
        .collect()
}

/// Mention count per canonical id.
pub fn mention_counts(mentions: &[EntityMention]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for m in mentions {
        *counts.entry(m.canonical_id.clone()).or_insert(0) += 1;
    }
    counts
}
