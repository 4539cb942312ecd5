//! Entity-relation tuple extraction.
//!
//! Extraction is pluggable through [`Extractor`]. The built-in
//! [`HeuristicExtractor`] finds entity mentions with a gazetteer and a
//! capitalization heuristic, keeps sentences with at least two distinct
//! entities, and emits one tuple per entity pair whose relation is the text
//! connecting the two mentions.

mod mentions;
mod normalize;

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, Span};
use crate::exec::Execution;

pub use mentions::{extract_mentions, mention_counts, select_sentences, EntityMention};
pub use normalize::{normalize_entity, AliasTable, Gazetteer, Lexicon};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("entity surface `{0}` has no alphanumeric content")]
    EmptyEntity(String),
    #[error("alias `{surface}` maps to both `{first}` and `{second}`")]
    AliasConflict {
        surface: String,
        first: String,
        second: String,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Jsonl {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("document `{doc_id}`: {source}")]
    Document {
        doc_id: String,
        #[source]
        source: Box<ExtractionError>,
    },
    #[error("{0}")]
    Other(String),
}

/// Source location of a tuple: a sentence of one document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Anchor {
    pub doc_id: String,
    pub span: Span,
}

/// One extracted entity-relation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub entity1: String,
    pub entity2: String,
    pub relation: String,
    /// The full source sentence.
    pub snippet: String,
    pub anchor: Anchor,
    pub salience: f64,
}

impl Tuple {
    /// Unordered entity pair, smaller id first.
    pub fn pair(&self) -> (&str, &str) {
        if self.entity1 <= self.entity2 {
            (&self.entity1, &self.entity2)
        } else {
            (&self.entity2, &self.entity1)
        }
    }

    fn key(&self) -> (&str, &str, &str, &Anchor) {
        (&self.entity1, &self.entity2, &self.relation, &self.anchor)
    }

    /// Checks the structural invariants against the source document.
    pub fn check(&self, doc: &Document) -> Result<(), String> {
        if self.entity1 == self.entity2 {
            return Err(format!("tuple relates `{}` to itself", self.entity1));
        }
        if self.anchor.doc_id != doc.doc_id {
            return Err(format!("anchor names `{}`, not `{}`", self.anchor.doc_id, doc.doc_id));
        }
        if !doc.sentence_spans.contains(&self.anchor.span) {
            return Err(format!("anchor {:?} is not a sentence span", self.anchor.span));
        }
        if doc.text(self.anchor.span) != self.snippet {
            return Err("snippet differs from the anchored sentence".into());
        }
        if !(self.salience >= 0.0 && self.salience.is_finite()) {
            return Err(format!("salience {} is not a finite non-negative number", self.salience));
        }
        Ok(())
    }
}

/// An ordered collection of tuples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleSet {
    tuples: Vec<Tuple>,
}

impl TupleSet {
    pub fn new(tuples: Vec<Tuple>) -> Self {
        TupleSet { tuples }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tuple> {
        self.tuples.iter()
    }

    pub fn as_slice(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn into_vec(self) -> Vec<Tuple> {
        self.tuples
    }

    /// Drops later duplicates on (entity1, entity2, relation, anchor).
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        let keep: Vec<bool> = self.tuples.iter().map(|t| seen.insert(t.key())).collect();
        let mut it = keep.into_iter();
        self.tuples.retain(|_| it.next().unwrap_or(false));
    }

    /// Orders by (doc id, sentence start), stable within a sentence.
    pub fn sort_by_anchor(&mut self) {
        self.tuples
            .sort_by(|a, b| (&a.anchor.doc_id, a.anchor.span).cmp(&(&b.anchor.doc_id, b.anchor.span)));
    }

    /// Fully deterministic order independent of input order.
    pub fn sort_canonical(&mut self) {
        self.tuples.sort_by(|a, b| {
            (&a.anchor, &a.entity1, &a.entity2, &a.relation)
                .cmp(&(&b.anchor, &b.entity1, &b.entity2, &b.relation))
                .then(a.salience.total_cmp(&b.salience))
        });
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        crate::store::canonical::hash_of(self).expect("tuples serialize")
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.tuples {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ExtractionError> {
        let mut tuples = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ExtractionError::Other(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let t = serde_json::from_str(&line)
                .map_err(|source| ExtractionError::Jsonl { line: i + 1, source })?;
            tuples.push(t);
        }
        Ok(TupleSet { tuples })
    }
}

impl FromIterator<Tuple> for TupleSet {
    fn from_iter<I: IntoIterator<Item = Tuple>>(iter: I) -> Self {
        TupleSet::new(iter.into_iter().collect())
    }
}

impl IntoIterator for TupleSet {
    type Item = Tuple;
    type IntoIter = std::vec::IntoIter<Tuple>;

    fn into_iter(self) -> Self::IntoIter {
        self.tuples.into_iter()
    }
}

impl<'a> IntoIterator for &'a TupleSet {
    type Item = &'a Tuple;
    type IntoIter = std::slice::Iter<'a, Tuple>;

    fn into_iter(self) -> Self::IntoIter {
        self.tuples.iter()
    }
}

/// Turns one document into tuples. Implementations must be pure.
pub trait Extractor: Sync {
    fn extract(&self, doc: &Document) -> Result<Vec<Tuple>, ExtractionError>;
}

/// Emits one tuple per unordered pair of distinct entities in a sentence.
///
/// Each entity is represented by its first mention in the sentence. The
/// relation spans from the start of the earlier mention to the end of the
/// later one; salience is the sum of both entities' mention counts in the
/// document.
pub fn extract_tuples(
    doc: &Document,
    sentence_index: usize,
    sentence_mentions: &[EntityMention],
    doc_counts: &HashMap<String, usize>,
) -> Vec<Tuple> {
    let Some(&span) = doc.sentence_spans.get(sentence_index) else {
        return Vec::new();
    };
    let mut firsts: Vec<&EntityMention> = Vec::new();
    let mut ordered: Vec<&EntityMention> = sentence_mentions
        .iter()
        .filter(|m| m.sentence_index == sentence_index)
        .collect();
    ordered.sort_by_key(|m| m.span.start);
    for m in ordered {
        if !firsts.iter().any(|f| f.canonical_id == m.canonical_id) {
            firsts.push(m);
        }
    }

    let snippet = doc.text(span).to_string();
    let count = |id: &str| doc_counts.get(id).copied().unwrap_or(0);
    let mut out = Vec::new();
    for (i, a) in firsts.iter().enumerate() {
        for b in &firsts[i + 1..] {
            let relation = doc.body[a.span.start..b.span.end].trim().to_string();
            out.push(Tuple {
                entity1: a.canonical_id.clone(),
                entity2: b.canonical_id.clone(),
                relation,
                snippet: snippet.clone(),
                anchor: Anchor {
                    doc_id: doc.doc_id.clone(),
                    span,
                },
                salience: (count(&a.canonical_id) + count(&b.canonical_id)) as f64,
            });
        }
    }
    out
}

/// The default extractor: gazetteer plus capitalization heuristics.
#[derive(Debug, Clone, Default)]
pub struct HeuristicExtractor {
    pub lexicon: Lexicon,
}

impl HeuristicExtractor {
    pub fn new(lexicon: Lexicon) -> Self {
        HeuristicExtractor { lexicon }
    }

    /// Verifies `tuple` against `doc`, including that both entities are
    /// mentioned in the anchored sentence.
    pub fn check_tuple(&self, tuple: &Tuple, doc: &Document) -> Result<(), String> {
        tuple.check(doc)?;
        let index = doc
            .sentence_spans
            .iter()
            .position(|s| *s == tuple.anchor.span)
            .ok_or("anchor is not a sentence")?;
        let snippet = tuple.snippet.to_lowercase();
        for entity in [&tuple.entity1, &tuple.entity2] {
            let found = extract_mentions(doc, &self.lexicon).into_iter().any(|m| {
                m.sentence_index == index
                    && &m.canonical_id == entity
                    && snippet.contains(&m.surface.to_lowercase())
            });
            if !found {
                return Err(format!("entity `{entity}` is not mentioned in the snippet"));
            }
        }
        Ok(())
    }
}

impl Extractor for HeuristicExtractor {
    fn extract(&self, doc: &Document) -> Result<Vec<Tuple>, ExtractionError> {
        let mentions = extract_mentions(doc, &self.lexicon);
        let counts = mention_counts(&mentions);
        let mut out = Vec::new();
        for idx in select_sentences(doc, &mentions) {
            let in_sentence: Vec<EntityMention> = mentions
                .iter()
                .filter(|m| m.sentence_index == idx)
                .cloned()
                .collect();
            out.extend(extract_tuples(doc, idx, &in_sentence, &counts));
        }
        Ok(out)
    }
}

/// Runs the built-in extractor over the whole corpus.
pub fn run_pipeline(corpus: &Corpus, lexicon: &Lexicon) -> Result<TupleSet, ExtractionError> {
    let extractor = HeuristicExtractor::new(lexicon.clone());
    run_pipeline_with(corpus, &extractor, Execution::default())
}

/// Extracts every document, deduplicates, and orders tuples by
/// (doc id, sentence, entity pair).
pub fn run_pipeline_with(
    corpus: &Corpus,
    extractor: &dyn Extractor,
    exec: Execution,
) -> Result<TupleSet, ExtractionError> {
    let per_doc = exec.try_map(&corpus.documents, |doc| {
        extractor
            .extract(doc)
            .map_err(|e| ExtractionError::Document {
                doc_id: doc.doc_id.clone(),
                source: Box::new(e),
            })
    })?;
    let mut set = TupleSet::new(per_doc.into_iter().flatten().collect());
    set.dedup();
    set.sort_by_anchor();
    Ok(set)
}
