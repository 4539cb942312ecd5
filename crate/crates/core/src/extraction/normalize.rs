use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractionError;
use crate::text::word_tokens;

/// Case-folds, collapses whitespace and strips surrounding punctuation.
fn fold(surface: &str) -> Result<String, ExtractionError> {
    let trimmed = surface.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return Err(ExtractionError::EmptyEntity(surface.to_string()));
    }
    Ok(trimmed
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase())
}

/// Maps normalized surface forms to canonical entity ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct AliasTable {
    map: BTreeMap<String, String>,
}

impl AliasTable {
    /// Builds the table, folding both sides. Two surfaces that fold to the
    /// same key must agree on their target.
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self, ExtractionError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (surface, canonical) in pairs {
            let key = fold(surface.as_ref())?;
            let target = fold(canonical.as_ref())?;
            if let Some(prev) = map.get(&key) {
                if *prev != target {
                    return Err(ExtractionError::AliasConflict {
                        surface: key,
                        first: prev.clone(),
                        second: target,
                    });
                }
            }
            map.insert(key, target);
        }
        Ok(AliasTable { map })
    }

    pub fn get(&self, folded: &str) -> Option<&str> {
        self.map.get(folded).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

impl TryFrom<BTreeMap<String, String>> for AliasTable {
    type Error = ExtractionError;

    fn try_from(map: BTreeMap<String, String>) -> Result<Self, Self::Error> {
        AliasTable::from_pairs(map)
    }
}

impl From<AliasTable> for BTreeMap<String, String> {
    fn from(table: AliasTable) -> Self {
        table.map
    }
}

/// Normalizes a surface form and resolves it through the alias table.
pub fn normalize_entity(surface: &str, aliases: &AliasTable) -> Result<String, ExtractionError> {
    let folded = fold(surface)?;
    Ok(match aliases.get(&folded) {
        Some(id) => id.to_string(),
        None => folded,
    })
}

/// Known entity names plus alias surfaces, matched case-insensitively on
/// token boundaries.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entities: BTreeSet<String>,
    surfaces: HashSet<Vec<String>>,
    max_tokens: usize,
}

fn lower_tokens(text: &str) -> Vec<String> {
    word_tokens(text)
        .into_iter()
        .map(|r| text[r].to_lowercase())
        .collect()
}

impl Gazetteer {
    fn build<'a, 'b>(
        entities: impl IntoIterator<Item = &'a str>,
        alias_surfaces: impl IntoIterator<Item = &'b str>,
    ) -> Result<Self, ExtractionError> {
        let mut g = Gazetteer::default();
        for e in entities {
            g.entities.insert(fold(e)?);
        }
        let mut surfaces: Vec<String> = g.entities.iter().cloned().collect();
        surfaces.extend(alias_surfaces.into_iter().map(str::to_string));
        for s in surfaces {
            let toks = lower_tokens(&s);
            if toks.is_empty() {
                continue;
            }
            g.max_tokens = g.max_tokens.max(toks.len());
            g.surfaces.insert(toks);
        }
        Ok(g)
    }

    pub fn entities(&self) -> &BTreeSet<String> {
        &self.entities
    }

    /// Length in tokens of the longest surface starting at `tokens[0]`.
    pub(crate) fn longest_match(&self, tokens: &[String]) -> Option<usize> {
        (1..=self.max_tokens.min(tokens.len()))
            .rev()
            .find(|&n| self.surfaces.contains(&tokens[..n]))
    }
}

/// Gazetteer and alias table, loaded together from
/// `{ "entities": [str], "aliases": { surface: canonical } }`.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    pub gazetteer: Gazetteer,
    pub aliases: AliasTable,
}

#[derive(Deserialize)]
struct LexiconFile {
    #[serde(default)]
    entities: Vec<String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

impl Lexicon {
    pub fn new<'a>(
        entities: impl IntoIterator<Item = &'a str>,
        aliases: AliasTable,
    ) -> Result<Self, ExtractionError> {
        let gazetteer = Gazetteer::build(entities, aliases.surfaces())?;
        Ok(Lexicon { gazetteer, aliases })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExtractionError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ExtractionError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: LexiconFile =
            serde_json::from_slice(&bytes).map_err(|source| ExtractionError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let aliases = AliasTable::from_pairs(file.aliases)?;
        Lexicon::new(file.entities.iter().map(String::as_str), aliases)
    }
}
