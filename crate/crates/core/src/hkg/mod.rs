//! Knowledge graph construction and the three-layer hierarchy built on it.
//!
//! Layers, top to bottom: the document collection grouped into partitions,
//! one minimap of central concepts per document, and the corpus-wide detail
//! graph. Each central concept maps to the detail nodes it anchors.

mod central;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Span};
use crate::exec::Execution;
use crate::extraction::{Anchor, Tuple, TupleSet};

pub use central::{extract_central_concepts, CentralConceptParams, DegreeEntry};

pub const HKG_FORMAT_VERSION: u32 = 1;

/// Default mention frequency below which detail nodes start hidden.
pub const DEFAULT_HIDE_THRESHOLD: u64 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not visible")]
    NotVisible(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid graph: {0}")]
    Invalid(String),
}

/// One relation carried by an edge, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgRelation {
    pub relation: String,
    pub snippet: String,
    pub anchor: Anchor,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgNode {
    pub entity: String,
    pub label: String,
    /// Number of distinct neighbours.
    pub degree: usize,
    /// Per document: number of distinct sentences relating this entity.
    pub frequency: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgEdge {
    /// Sorted entity pair.
    pub endpoints: (String, String),
    pub relations: Vec<KgRelation>,
}

impl KgEdge {
    pub fn touches(&self, node: &str) -> bool {
        self.endpoints.0 == node || self.endpoints.1 == node
    }
}

#[derive(Deserialize)]
struct GraphRepr {
    documents: BTreeSet<String>,
    nodes: BTreeMap<String, KgNode>,
    edges: Vec<KgEdge>,
}

/// Entities as nodes, entity pairs as edges aggregating their relations.
///
/// Edges are kept sorted by endpoints; an edge's id is its position.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr")]
pub struct KnowledgeGraph {
    /// Documents this graph covers, including ones without any edges.
    pub documents: BTreeSet<String>,
    pub nodes: BTreeMap<String, KgNode>,
    pub edges: Vec<KgEdge>,
    #[serde(skip)]
    adjacency: BTreeMap<String, BTreeSet<String>>,
    #[serde(skip)]
    edge_index: HashMap<(String, String), usize>,
}

impl TryFrom<GraphRepr> for KnowledgeGraph {
    type Error = GraphError;

    fn try_from(r: GraphRepr) -> Result<Self, Self::Error> {
        let g = KnowledgeGraph::assemble(r.documents, r.nodes, r.edges);
        g.validate()?;
        Ok(g)
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl KnowledgeGraph {
    fn assemble(
        documents: BTreeSet<String>,
        nodes: BTreeMap<String, KgNode>,
        edges: Vec<KgEdge>,
    ) -> Self {
        let mut adjacency: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut edge_index = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            let (a, b) = &e.endpoints;
            adjacency.entry(a.clone()).or_default().insert(b.clone());
            adjacency.entry(b.clone()).or_default().insert(a.clone());
            edge_index.insert(e.endpoints.clone(), i);
        }
        KnowledgeGraph {
            documents,
            nodes,
            edges,
            adjacency,
            edge_index,
        }
    }

    /// Builds a graph from edges, deriving nodes, degrees and frequencies.
    fn from_edges(documents: BTreeSet<String>, mut edges: Vec<KgEdge>) -> Self {
        edges.sort_by(|a, b| a.endpoints.cmp(&b.endpoints));
        let mut sentences: BTreeMap<&str, BTreeMap<&str, BTreeSet<Span>>> = BTreeMap::new();
        for e in &edges {
            for r in &e.relations {
                for end in [&e.endpoints.0, &e.endpoints.1] {
                    sentences
                        .entry(end)
                        .or_default()
                        .entry(&r.anchor.doc_id)
                        .or_default()
                        .insert(r.anchor.span);
                }
            }
        }
        let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &edges {
            *degree.entry(&e.endpoints.0).or_default() += 1;
            *degree.entry(&e.endpoints.1).or_default() += 1;
        }
        let nodes = sentences
            .into_iter()
            .map(|(entity, per_doc)| {
                let node = KgNode {
                    entity: entity.to_string(),
                    label: entity.to_string(),
                    degree: degree.get(entity).copied().unwrap_or(0),
                    frequency: per_doc
                        .into_iter()
                        .map(|(d, s)| (d.to_string(), s.len() as u64))
                        .collect(),
                };
                (entity.to_string(), node)
            })
            .collect();
        KnowledgeGraph::assemble(documents, nodes, edges)
    }

    /// Checks the structural invariants, including the handshake property.
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::Invalid(m));
        for w in self.edges.windows(2) {
            if w[0].endpoints >= w[1].endpoints {
                return bad(format!("edges unsorted or duplicated at {:?}", w[1].endpoints));
            }
        }
        for e in &self.edges {
            let (a, b) = &e.endpoints;
            if a >= b {
                return bad(format!("edge endpoints {a:?}, {b:?} not distinct and ordered"));
            }
            if !self.nodes.contains_key(a) || !self.nodes.contains_key(b) {
                return bad(format!("edge {a:?}-{b:?} references a missing node"));
            }
            if e.relations.is_empty() {
                return bad(format!("edge {a:?}-{b:?} has no relations"));
            }
        }
        for (id, n) in &self.nodes {
            if *id != n.entity {
                return bad(format!("node key {id:?} differs from entity {:?}", n.entity));
            }
            let actual = self.adjacency.get(id).map_or(0, BTreeSet::len);
            if n.degree != actual {
                return bad(format!("node {id:?} degree {} but {} incident edges", n.degree, actual));
            }
        }
        if !self.handshake_holds() {
            return bad("degree sum differs from twice the edge count".into());
        }
        Ok(())
    }

    pub fn handshake_holds(&self) -> bool {
        self.nodes.values().map(|n| n.degree).sum::<usize>() == 2 * self.edges.len()
    }

    pub fn neighbors(&self, node: &str) -> impl Iterator<Item = &str> {
        self.adjacency
            .get(node)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn edge_id(&self, a: &str, b: &str) -> Option<usize> {
        self.edge_index.get(&ordered(a, b)).copied()
    }

    pub fn edge(&self, a: &str, b: &str) -> Option<&KgEdge> {
        self.edge_id(a, b).map(|i| &self.edges[i])
    }

    pub fn degree_entries(&self) -> Vec<DegreeEntry> {
        self.nodes
            .values()
            .map(|n| DegreeEntry::new(n.entity.clone(), n.degree))
            .collect()
    }

    pub fn frequency(&self, node: &str, doc_id: &str) -> u64 {
        self.nodes
            .get(node)
            .and_then(|n| n.frequency.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// Adds documents that contributed no tuples.
    pub fn register_documents<I: IntoIterator<Item = String>>(&mut self, ids: I) {
        self.documents.extend(ids);
    }

    /// Flattens the edges back into tuples, lower endpoint first.
    pub fn tuples(&self) -> TupleSet {
        let mut set: TupleSet = self
            .edges
            .iter()
            .flat_map(|e| {
                e.relations.iter().map(move |r| Tuple {
                    entity1: e.endpoints.0.clone(),
                    entity2: e.endpoints.1.clone(),
                    relation: r.relation.clone(),
                    snippet: r.snippet.clone(),
                    anchor: r.anchor.clone(),
                    salience: r.salience,
                })
            })
            .collect();
        set.sort_canonical();
        set
    }
}

/// One node per entity and one edge per unordered entity pair; relations
/// on an edge are deduplicated on (relation, anchor).
pub fn build_kg(tuples: &TupleSet) -> KnowledgeGraph {
    let mut edges: BTreeMap<(String, String), Vec<KgRelation>> = BTreeMap::new();
    let mut documents = BTreeSet::new();
    for t in tuples {
        if t.entity1 == t.entity2 {
            continue;
        }
        documents.insert(t.anchor.doc_id.clone());
        let rels = edges.entry(ordered(&t.entity1, &t.entity2)).or_default();
        if !rels
            .iter()
            .any(|r| r.relation == t.relation && r.anchor == t.anchor)
        {
            rels.push(KgRelation {
                relation: t.relation.clone(),
                snippet: t.snippet.clone(),
                anchor: t.anchor.clone(),
                salience: t.salience,
            });
        }
    }
    let edges = edges
        .into_iter()
        .map(|(endpoints, relations)| KgEdge {
            endpoints,
            relations,
        })
        .collect();
    KnowledgeGraph::from_edges(documents, edges)
}

/// The subgraph induced by edges with at least one relation anchored in
/// `doc_id`, keeping only those relations. Degrees and frequencies are
/// recomputed within the subgraph.
pub fn document_subgraph(kg: &KnowledgeGraph, doc_id: &str) -> Result<KnowledgeGraph, GraphError> {
    if !kg.documents.contains(doc_id) {
        return Err(GraphError::UnknownDocument(doc_id.to_string()));
    }
    let edges = kg
        .edges
        .iter()
        .filter_map(|e| {
            let relations: Vec<KgRelation> = e
                .relations
                .iter()
                .filter(|r| r.anchor.doc_id == doc_id)
                .cloned()
                .collect();
            (!relations.is_empty()).then(|| KgEdge {
                endpoints: e.endpoints.clone(),
                relations,
            })
        })
        .collect();
    let documents = BTreeSet::from([doc_id.to_string()]);
    Ok(KnowledgeGraph::from_edges(documents, edges))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralConcept {
    pub entity: String,
    /// Degree within the document subgraph.
    pub degree: usize,
    /// Frequency within the document.
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub doc_id: String,
    pub title: String,
    pub url: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionPartition {
    pub partition_id: String,
    pub query: String,
    pub documents: Vec<DocumentEntry>,
}

impl CollectionPartition {
    pub fn from_corpus(corpus: &Corpus) -> Vec<CollectionPartition> {
        corpus
            .partitions
            .iter()
            .map(|p| CollectionPartition {
                partition_id: p.partition_id.clone(),
                query: p.query.clone(),
                documents: p
                    .documents
                    .iter()
                    .filter_map(|id| corpus.document(id))
                    .map(|d| DocumentEntry {
                        doc_id: d.doc_id.clone(),
                        title: d.title.clone(),
                        url: d.source_url.clone(),
                        rank: d.rank,
                    })
                    .collect(),
            })
            .collect()
    }
}

/// The three synchronized layers plus concept-to-detail mappings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hkg {
    pub format_version: u32,
    pub params: CentralConceptParams,
    pub collection: Vec<CollectionPartition>,
    /// Per document, central concepts by (degree desc, entity asc).
    pub minimaps: BTreeMap<String, Vec<CentralConcept>>,
    /// Per document and concept: the concept plus its neighbours in the
    /// document subgraph.
    pub mappings: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    pub detail: KnowledgeGraph,
}

impl Hkg {
    pub fn document_ids(&self) -> impl Iterator<Item = &str> {
        self.collection
            .iter()
            .flat_map(|p| p.documents.iter().map(|d| d.doc_id.as_str()))
    }

    pub fn document(&self, doc_id: &str) -> Option<&DocumentEntry> {
        self.collection
            .iter()
            .flat_map(|p| p.documents.iter())
            .find(|d| d.doc_id == doc_id)
    }

    pub fn minimap(&self, doc_id: &str) -> Result<&[CentralConcept], GraphError> {
        self.minimaps
            .get(doc_id)
            .map(Vec::as_slice)
            .ok_or_else(|| GraphError::UnknownDocument(doc_id.to_string()))
    }

    /// Detail nodes shown when `doc_id` is first opened.
    pub fn initial_visible(
        &self,
        doc_id: &str,
        hide_threshold: u64,
    ) -> Result<BTreeSet<String>, GraphError> {
        let concepts = self.minimap(doc_id)?;
        Ok(visible_nodes(&self.detail, doc_id, hide_threshold, concepts))
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        self.detail.validate()?;
        if self.format_version != HKG_FORMAT_VERSION {
            return Err(GraphError::Invalid(format!(
                "format version {} (expected {HKG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        for (doc, concepts) in &self.minimaps {
            if concepts.len() > self.params.max_count {
                return Err(GraphError::Invalid(format!("minimap of `{doc}` exceeds max_count")));
            }
            if let Some(c) = concepts.iter().find(|c| !self.detail.nodes.contains_key(&c.entity)) {
                return Err(GraphError::Invalid(format!("minimap entity `{}` missing", c.entity)));
            }
        }
        for per_doc in self.mappings.values() {
            for targets in per_doc.values() {
                if let Some(t) = targets.iter().find(|t| !self.detail.nodes.contains_key(*t)) {
                    return Err(GraphError::Invalid(format!("mapping target `{t}` missing")));
                }
            }
        }
        Ok(())
    }
}

/// Builds the hierarchy for a loaded corpus.
pub fn build_hkg(
    corpus: &Corpus,
    tuples: &TupleSet,
    params: &CentralConceptParams,
    exec: Execution,
) -> Result<Hkg, GraphError> {
    build_hkg_from_collection(CollectionPartition::from_corpus(corpus), tuples, params, exec)
}

/// Builds the hierarchy over an existing collection layer; every tuple must
/// anchor in a document of the collection.
pub fn build_hkg_from_collection(
    collection: Vec<CollectionPartition>,
    tuples: &TupleSet,
    params: &CentralConceptParams,
    exec: Execution,
) -> Result<Hkg, GraphError> {
    params.validate()?;
    let doc_ids: Vec<String> = collection
        .iter()
        .flat_map(|p| p.documents.iter().map(|d| d.doc_id.clone()))
        .collect();
    let mut detail = build_kg(tuples);
    if let Some(stray) = detail.documents.iter().find(|d| !doc_ids.contains(d)) {
        return Err(GraphError::UnknownDocument(stray.clone()));
    }
    detail.register_documents(doc_ids.iter().cloned());

    type Layer = (Vec<CentralConcept>, BTreeMap<String, BTreeSet<String>>);
    let layers: Vec<Layer> = exec.try_map(&doc_ids, |doc| {
        let sub = document_subgraph(&detail, doc)?;
        let concepts: Vec<CentralConcept> = extract_central_concepts(&sub.degree_entries(), params)
            .into_iter()
            .map(|d| CentralConcept {
                frequency: sub.frequency(&d.entity, doc),
                entity: d.entity,
                degree: d.degree,
            })
            .collect();
        let mappings = concepts
            .iter()
            .map(|c| {
                let mut anchored: BTreeSet<String> =
                    sub.neighbors(&c.entity).map(str::to_string).collect();
                anchored.insert(c.entity.clone());
                (c.entity.clone(), anchored)
            })
            .collect();
        Ok::<_, GraphError>((concepts, mappings))
    })?;

    let mut minimaps = BTreeMap::new();
    let mut mappings = BTreeMap::new();
    for (doc, (concepts, maps)) in doc_ids.into_iter().zip(layers) {
        minimaps.insert(doc.clone(), concepts);
        mappings.insert(doc, maps);
    }
    Ok(Hkg {
        format_version: HKG_FORMAT_VERSION,
        params: *params,
        collection,
        minimaps,
        mappings,
        detail,
    })
}

/// Nodes whose frequency in `doc_id` reaches `hide_threshold`, plus every
/// central concept regardless of frequency.
pub fn visible_nodes(
    kg: &KnowledgeGraph,
    doc_id: &str,
    hide_threshold: u64,
    central: &[CentralConcept],
) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = kg
        .nodes
        .values()
        .filter(|n| n.frequency.get(doc_id).copied().unwrap_or(0) >= hide_threshold)
        .map(|n| n.entity.clone())
        .collect();
    out.extend(
        central
            .iter()
            .filter(|c| kg.nodes.contains_key(&c.entity))
            .map(|c| c.entity.clone()),
    );
    out
}

/// Saturated: the concept and its direct neighbours. Blended: the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusView {
    pub saturated: BTreeSet<String>,
    pub blended: BTreeSet<String>,
}

pub fn focus_filter(kg: &KnowledgeGraph, concept: &str) -> Result<FocusView, GraphError> {
    if !kg.nodes.contains_key(concept) {
        return Err(GraphError::UnknownNode(concept.to_string()));
    }
    let mut saturated: BTreeSet<String> = kg.neighbors(concept).map(str::to_string).collect();
    saturated.insert(concept.to_string());
    let blended = kg
        .nodes
        .keys()
        .filter(|k| !saturated.contains(*k))
        .cloned()
        .collect();
    Ok(FocusView { saturated, blended })
}

/// Click on a visible node.
///
/// If any neighbour is hidden, all neighbours become visible. Otherwise
/// the click collapses: neighbours whose only visible neighbour is the
/// clicked node are hidden again. The clicked node stays visible.
pub fn expand_state(
    kg: &KnowledgeGraph,
    visible: &BTreeSet<String>,
    clicked: &str,
) -> Result<BTreeSet<String>, GraphError> {
    if !kg.nodes.contains_key(clicked) {
        return Err(GraphError::UnknownNode(clicked.to_string()));
    }
    if !visible.contains(clicked) {
        return Err(GraphError::NotVisible(clicked.to_string()));
    }
    let neighbors: Vec<&str> = kg.neighbors(clicked).collect();
    if neighbors.iter().any(|n| !visible.contains(*n)) {
        let mut out = visible.clone();
        out.extend(neighbors.iter().map(|n| n.to_string()));
        return Ok(out);
    }
    let solely_revealed = |n: &str| {
        kg.neighbors(n)
            .all(|m| m == clicked || !visible.contains(m))
    };
    Ok(visible
        .iter()
        .filter(|v| v.as_str() == clicked || !neighbors.contains(&v.as_str()) || !solely_revealed(v))
        .cloned()
        .collect())
}
