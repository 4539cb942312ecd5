use std::cmp::Reverse;
use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{read_json, read_text, CorpusError, ManifestDocument, Partition, RetrievalConfig};
use crate::text::{is_stopword, terms};

/// A candidate document in the fixture search index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: String,
    pub title: String,
    pub url: String,
    pub body: String,
}

/// Local stand-in for a web search engine: ranks documents by query-term
/// frequency over title and body.
#[derive(Debug, Clone, Default)]
pub struct FixtureIndex {
    entries: Vec<IndexEntry>,
    term_counts: Vec<HashMap<String, u64>>,
}

#[derive(Deserialize)]
struct IndexFile {
    documents: Vec<ManifestDocument>,
}

impl FixtureIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Self {
        let term_counts = entries
            .iter()
            .map(|e| {
                let mut counts = HashMap::new();
                for t in terms(&e.title).chain(terms(&e.body)) {
                    *counts.entry(t).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        FixtureIndex {
            entries,
            term_counts,
        }
    }

    /// Reads `{ "documents": [ { "id", "title", "url", "path" } ] }`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file: IndexFile = read_json(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let entries = file
            .documents
            .into_iter()
            .map(|d| {
                Ok(IndexEntry {
                    body: read_text(base, &d.path)?,
                    id: d.id,
                    title: d.title,
                    url: d.url,
                })
            })
            .collect::<Result<Vec<_>, CorpusError>>()?;
        Ok(FixtureIndex::new(entries))
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn entry(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Sum of occurrences of each non-stopword query term.
    pub fn score(&self, query: &str, id: &str) -> Option<u64> {
        let i = self.entries.iter().position(|e| e.id == id)?;
        Some(self.score_at(&query_terms(query), i))
    }

    fn score_at(&self, query: &[String], i: usize) -> u64 {
        query
            .iter()
            .map(|t| self.term_counts[i].get(t).copied().unwrap_or(0))
            .sum()
    }
}

fn query_terms(query: &str) -> Vec<String> {
    terms(query).filter(|t| !is_stopword(t)).collect()
}

/// Lowercase hyphenated identifier derived from a query.
pub(crate) fn slug(query: &str) -> String {
    terms(query).collect::<Vec<_>>().join("-")
}

/// Returns at most `cfg.n` documents for `query`, best first.
///
/// Documents whose URL does not contain `cfg.domain_filter` are excluded
/// before ranking; zero-score documents never match. Equal scores rank by
/// ascending document id.
pub fn retrieve(
    query: &str,
    cfg: &RetrievalConfig,
    index: &FixtureIndex,
) -> Result<Partition, CorpusError> {
    cfg.validate()?;
    let q = query_terms(query);
    let filter = cfg.domain_filter.to_lowercase();
    let mut scored: Vec<(u64, &str)> = index
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| filter.is_empty() || e.url.to_lowercase().contains(&filter))
        .map(|(i, e)| (index.score_at(&q, i), e.id.as_str()))
        .filter(|&(s, _)| s > 0)
        .collect();
    scored.sort_by_key(|&(s, id)| (Reverse(s), id));
    scored.truncate(cfg.n);
    Ok(Partition {
        partition_id: slug(query),
        query: query.to_string(),
        documents: scored.into_iter().map(|(_, id)| id.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, url: &str, body: &str) -> IndexEntry {
        IndexEntry {
            id: id.into(),
            title: String::new(),
            url: url.into(),
            body: body.into(),
        }
    }

    #[test]
    fn ties_break_on_doc_id() {
        let index = FixtureIndex::new(vec![
            entry("zeta", "https://en.wikipedia.org/z", "Canada capital"),
            entry("alpha", "https://en.wikipedia.org/a", "capital Canada"),
        ]);
        let p = retrieve("capital of Canada", &RetrievalConfig::default(), &index).unwrap();
        assert_eq!(p.documents, ["alpha", "zeta"]);
        assert_eq!(index.score("capital of Canada", "alpha"), Some(2));
    }

    #[test]
    fn no_match_gives_empty_partition() {
        let index = FixtureIndex::new(vec![entry("a", "https://en.wikipedia.org/a", "Ottawa")]);
        let p = retrieve("Tehran", &RetrievalConfig::default(), &index).unwrap();
        assert!(p.documents.is_empty());
        assert_eq!(p.partition_id, "tehran");
    }

    #[test]
    fn domain_filter_excludes_before_ranking() {
        let index = FixtureIndex::new(vec![
            entry("blog", "https://example.org/x", "capital capital capital"),
            entry("wiki", "https://en.wikipedia.org/w", "capital"),
        ]);
        let p = retrieve("capital", &RetrievalConfig::default(), &index).unwrap();
        assert_eq!(p.documents, ["wiki"]);
        let open = RetrievalConfig {
            domain_filter: String::new(),
            ..Default::default()
        };
        assert_eq!(retrieve("capital", &open, &index).unwrap().documents, ["blog", "wiki"]);
    }

    #[test]
    fn results_capped_at_n() {
        let entries = (0..25)
            .map(|i| entry(&format!("d{i:02}"), "wikipedia", "capital"))
            .collect();
        let index = FixtureIndex::new(entries);
        let cfg = RetrievalConfig::default();
        let p = retrieve("capital", &cfg, &index).unwrap();
        assert_eq!(p.documents.len(), 10);
        assert_eq!(p.documents[0], "d00");
    }

    #[test]
    fn stopwords_do_not_score() {
        let index = FixtureIndex::new(vec![entry("a", "wikipedia", "of of of the")]);
        assert_eq!(index.score("Cities of Canada", "a"), Some(0));
    }
}
