//! Versioned, hash-checked artifact files and the interaction event log.
//!
//! An artifact file holds one canonical JSON envelope:
//! `{"content_hash":..,"format_version":..,"kind":..,"payload":..}` where
//! the hash is the SHA-256 of the canonical payload text.

pub mod canonical;
mod events;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::extraction::TupleSet;
use crate::hkg::Hkg;
use crate::quality::QualityReport;

pub use events::{append_event, read_events, EventLog};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("{path}: format version {found} is not supported (this build reads version {supported})")]
    Incompatible {
        path: PathBuf,
        found: u64,
        supported: u32,
    },
    #[error("{path}: corrupted artifact: {reason}")]
    Corruption { path: PathBuf, reason: String },
    #[error("{path}: expected a {expected} artifact, found {found}")]
    WrongKind {
        path: PathBuf,
        expected: ArtifactKind,
        found: String,
    },
    #[error("{path}: payload does not match the {kind} schema: {reason}")]
    Schema {
        path: PathBuf,
        kind: ArtifactKind,
        reason: String,
    },
    #[error("invalid {kind} artifact: {reason}")]
    Invalid { kind: ArtifactKind, reason: String },
    #[error("session `{session}`: event at t_ms={got} precedes the last logged t_ms={last}")]
    OutOfOrder { session: String, last: u64, got: u64 },
    #[error("{path}: line {line}: {reason}")]
    Event {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Corpus,
    Tuples,
    Hkg,
    Report,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Corpus => "corpus",
            ArtifactKind::Tuples => "tuples",
            ArtifactKind::Hkg => "hkg",
            ArtifactKind::Report => "report",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value that can be stored as an artifact.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: ArtifactKind;

    fn validate(&self) -> Result<(), String>;
}

impl Artifact for Corpus {
    const KIND: ArtifactKind = ArtifactKind::Corpus;

    fn validate(&self) -> Result<(), String> {
        Corpus::validate(self)
    }
}

impl Artifact for TupleSet {
    const KIND: ArtifactKind = ArtifactKind::Tuples;

    fn validate(&self) -> Result<(), String> {
        for (i, t) in self.iter().enumerate() {
            if t.entity1 == t.entity2 {
                return Err(format!("tuple {i} relates `{}` to itself", t.entity1));
            }
            if !(t.salience.is_finite() && t.salience >= 0.0) {
                return Err(format!("tuple {i} has salience {}", t.salience));
            }
            if t.anchor.span.end < t.anchor.span.start {
                return Err(format!("tuple {i} has an inverted anchor span"));
            }
        }
        Ok(())
    }
}

impl Artifact for Hkg {
    const KIND: ArtifactKind = ArtifactKind::Hkg;

    fn validate(&self) -> Result<(), String> {
        Hkg::validate(self).map_err(|e| e.to_string())
    }
}

impl Artifact for QualityReport {
    const KIND: ArtifactKind = ArtifactKind::Report;

    fn validate(&self) -> Result<(), String> {
        QualityReport::validate(self)
    }
}

/// A parsed envelope whose hash and version have been checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub content_hash: String,
    pub format_version: u32,
    pub kind: ArtifactKind,
    pub payload: Value,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Canonical file text for an artifact, with its content hash.
pub fn encode<T: Artifact>(artifact: &T) -> Result<(String, String), StoreError> {
    artifact.validate().map_err(|reason| StoreError::Invalid {
        kind: T::KIND,
        reason,
    })?;
    let payload = serde_json::to_value(artifact)?;
    let hash = canonical::sha256_hex(canonical::to_canonical_string(&payload).as_bytes());
    let envelope = Envelope {
        content_hash: hash.clone(),
        format_version: FORMAT_VERSION,
        kind: T::KIND,
        payload,
    };
    let mut text = canonical::to_canonical(&envelope)?;
    text.push('\n');
    Ok((text, hash))
}

/// Writes the artifact atomically and returns its content hash.
pub fn save<T: Artifact>(artifact: &T, path: impl AsRef<Path>) -> Result<String, StoreError> {
    let path = path.as_ref();
    let (text, hash) = encode(artifact)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(text.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    log::debug!("saved {} artifact to {} ({hash})", T::KIND, path.display());
    Ok(hash)
}

/// Parses an envelope, checking version and hash but not the payload schema.
pub fn decode_envelope(text: &str, path: &Path) -> Result<Envelope, StoreError> {
    let corrupt = |reason: String| StoreError::Corruption {
        path: path.to_path_buf(),
        reason,
    };
    let value: Value = serde_json::from_str(text).map_err(|e| corrupt(format!("not valid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| corrupt("envelope is not an object".into()))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(StoreError::Incompatible {
            path: path.to_path_buf(),
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let payload = obj
        .get("payload")
        .ok_or_else(|| corrupt("missing payload".into()))?;
    let stored = obj
        .get("content_hash")
        .and_then(Value::as_str)
        .ok_or_else(|| corrupt("missing content_hash".into()))?;
    let actual = canonical::sha256_hex(canonical::to_canonical_string(payload).as_bytes());
    if stored != actual {
        return Err(corrupt(format!("content hash {stored} does not match payload hash {actual}")));
    }
    serde_json::from_value(value).map_err(|e| corrupt(format!("malformed envelope: {e}")))
}

pub fn load_envelope(path: impl AsRef<Path>) -> Result<Envelope, StoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    decode_envelope(&text, path)
}

fn from_envelope<T: Artifact>(env: Envelope, path: &Path) -> Result<T, StoreError> {
    if env.kind != T::KIND {
        return Err(StoreError::WrongKind {
            path: path.to_path_buf(),
            expected: T::KIND,
            found: env.kind.to_string(),
        });
    }
    let schema = |reason: String| StoreError::Schema {
        path: path.to_path_buf(),
        kind: T::KIND,
        reason,
    };
    let artifact: T = serde_json::from_value(env.payload).map_err(|e| schema(e.to_string()))?;
    artifact.validate().map_err(schema)?;
    Ok(artifact)
}

/// Loads an artifact, verifying version, hash, kind and schema.
pub fn load<T: Artifact>(path: impl AsRef<Path>) -> Result<T, StoreError> {
    let path = path.as_ref();
    from_envelope(load_envelope(path)?, path)
}

/// Loads an artifact together with its content hash.
pub fn load_with_hash<T: Artifact>(path: impl AsRef<Path>) -> Result<(T, String), StoreError> {
    let path = path.as_ref();
    let env = load_envelope(path)?;
    let hash = env.content_hash.clone();
    Ok((from_envelope(env, path)?, hash))
}

/// Content hash an artifact would be saved under.
pub fn content_hash<T: Artifact>(artifact: &T) -> Result<String, StoreError> {
    encode(artifact).map(|(_, h)| h)
}
