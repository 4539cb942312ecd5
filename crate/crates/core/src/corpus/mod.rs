//! Document collections: loading, sentence segmentation and fixture-backed
//! retrieval.

mod retrieve;
mod segment;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use retrieve::{retrieve, FixtureIndex, IndexEntry};
pub use segment::{split_sentences, Span};

#[derive(Debug, Error)]
pub enum CorpusError {
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
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),
    #[error("duplicate partition id `{0}`")]
    DuplicatePartition(String),
    #[error("partition `{partition}` lists {len} documents, more than the configured maximum {max}")]
    PartitionTooLarge {
        partition: String,
        len: usize,
        max: usize,
    },
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
}

/// One retrieved document with its sentence segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    /// Empty for local fixtures without a source page.
    pub source_url: String,
    pub body: String,
    pub sentence_spans: Vec<Span>,
    /// 1-based position within the owning partition.
    pub rank: u32,
    pub partition_id: String,
}

impl Document {
    /// Builds a document and segments its body.
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        source_url: impl Into<String>,
        body: impl Into<String>,
        rank: u32,
        partition_id: impl Into<String>,
    ) -> Self {
        let body = body.into();
        let sentence_spans = split_sentences(&body);
        Document {
            doc_id: doc_id.into(),
            title: title.into(),
            source_url: source_url.into(),
            body,
            sentence_spans,
            rank,
            partition_id: partition_id.into(),
        }
    }

    pub fn sentence(&self, index: usize) -> Option<&str> {
        self.sentence_spans
            .get(index)
            .map(|s| &self.body[s.start..s.end])
    }

    pub fn text(&self, span: Span) -> &str {
        &self.body[span.start..span.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub partition_id: String,
    pub query: String,
    /// Document ids by ascending rank.
    pub documents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Maximum documents per query.
    pub n: usize,
    /// Substring a document URL must contain; empty disables the filter.
    pub domain_filter: String,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            n: 10,
            domain_filter: "wikipedia".to_string(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n == 0 {
            return Err(CorpusError::InvalidConfig("n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Partitions plus the documents they reference, in manifest order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub partitions: Vec<Partition>,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn empty_partitions(&self) -> impl Iterator<Item = &Partition> {
        self.partitions.iter().filter(|p| p.documents.is_empty())
    }

    /// Checks the document and partition invariants.
    pub fn validate(&self) -> Result<(), String> {
        let mut ids = HashSet::new();
        for doc in &self.documents {
            if !ids.insert(doc.doc_id.as_str()) {
                return Err(format!("duplicate document id `{}`", doc.doc_id));
            }
            if doc.rank == 0 {
                return Err(format!("document `{}` has rank 0", doc.doc_id));
            }
            let mut prev_end = 0;
            for span in &doc.sentence_spans {
                if span.start < prev_end || span.end < span.start || span.end > doc.body.len() {
                    return Err(format!("document `{}` has invalid sentence spans", doc.doc_id));
                }
                if !doc.body.is_char_boundary(span.start) || !doc.body.is_char_boundary(span.end) {
                    return Err(format!("document `{}` span splits a character", doc.doc_id));
                }
                prev_end = span.end;
            }
        }
        for p in &self.partitions {
            if let Some(missing) = p.documents.iter().find(|d| !ids.contains(d.as_str())) {
                return Err(format!("partition `{}` references unknown `{missing}`", p.partition_id));
            }
        }
        Ok(())
    }
}

/// On-disk manifest listing partitions and their document files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub partitions: Vec<ManifestPartition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPartition {
    pub id: String,
    pub query: String,
    pub documents: Vec<ManifestDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestDocument {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub url: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| CorpusError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_text(base: &Path, rel: &Path) -> Result<String, CorpusError> {
    let path = base.join(rel);
    fs::read_to_string(&path).map_err(|source| CorpusError::Io { path, source })
}

/// Loads a manifest with the default retrieval config.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    load_corpus_with(manifest_path, &RetrievalConfig::default())
}

/// Loads a manifest and every document it references.
///
/// Document ranks follow manifest order within each partition. Empty
/// partitions are kept and logged as warnings.
pub fn load_corpus_with(
    manifest_path: impl AsRef<Path>,
    cfg: &RetrievalConfig,
) -> Result<Corpus, CorpusError> {
    cfg.validate()?;
    let manifest_path = manifest_path.as_ref();
    let manifest: Manifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut corpus = Corpus::default();
    let mut doc_ids = HashSet::new();
    let mut partition_ids = HashSet::new();
    for part in manifest.partitions {
        if !partition_ids.insert(part.id.clone()) {
            return Err(CorpusError::DuplicatePartition(part.id));
        }
        if part.documents.len() > cfg.n {
            return Err(CorpusError::PartitionTooLarge {
                partition: part.id,
                len: part.documents.len(),
                max: cfg.n,
            });
        }
        if part.documents.is_empty() {
            log::warn!("partition `{}` has no documents", part.id);
        }
        let mut members = Vec::with_capacity(part.documents.len());
        for (i, entry) in part.documents.into_iter().enumerate() {
            if !doc_ids.insert(entry.id.clone()) {
                return Err(CorpusError::DuplicateDocument(entry.id));
            }
            let body = read_text(base, &entry.path)?;
            members.push(entry.id.clone());
            corpus.documents.push(Document::new(
                entry.id,
                entry.title,
                entry.url,
                body,
                (i + 1) as u32,
                part.id.clone(),
            ));
        }
        corpus.partitions.push(Partition {
            partition_id: part.id,
            query: part.query,
            documents: members,
        });
    }
    Ok(corpus)
}
