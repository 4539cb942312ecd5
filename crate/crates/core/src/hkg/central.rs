use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Thresholds for central-concept extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralConceptParams {
    /// Starting degree threshold.
    pub min_degree: usize,
    /// Maximum number of concepts per minimap.
    pub max_count: usize,
    /// When the iterative threshold collapses to nothing because too many
    /// nodes share the top degree, return the `max_count` highest-degree
    /// nodes instead of an empty set.
    #[serde(default)]
    pub relax_ties: bool,
}

impl Default for CentralConceptParams {
    fn default() -> Self {
        CentralConceptParams {
            min_degree: 3,
            max_count: 15,
            relax_ties: false,
        }
    }
}

impl CentralConceptParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.min_degree < 1 {
            return Err(GraphError::InvalidParams("min_degree must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DegreeEntry {
    pub entity: String,
    pub degree: usize,
}

impl DegreeEntry {
    pub fn new(entity: impl Into<String>, degree: usize) -> Self {
        DegreeEntry {
            entity: entity.into(),
            degree,
        }
    }
}

fn sort_by_degree(nodes: &mut [DegreeEntry]) {
    nodes.sort_by(|a, b| (Reverse(a.degree), &a.entity).cmp(&(Reverse(b.degree), &b.entity)));
}

/// Iterative degree thresholding.
///
/// Starting at `params.min_degree`, collects every node whose degree reaches
/// the threshold; returns the collection once it holds at most
/// `params.max_count` nodes, otherwise raises the threshold by one and
/// repeats. The loop ends because the collection is eventually empty.
/// Output is sorted by (degree desc, entity asc).
pub fn extract_central_concepts(
    nodes: &[DegreeEntry],
    params: &CentralConceptParams,
) -> Vec<DegreeEntry> {
    let mut min_degree = params.min_degree;
    let central_nodes: Vec<&DegreeEntry> = loop {
        let mut central_nodes = Vec::new();
        for node in nodes {
            if node.degree >= min_degree {
                central_nodes.push(node);
            }
        }
        if central_nodes.len() <= params.max_count {
            break central_nodes;
        }
        min_degree += 1;
    };
    let mut central: Vec<DegreeEntry> = central_nodes.into_iter().cloned().collect();

    if central.is_empty() && params.relax_ties && params.max_count > 0 {
        central = nodes
            .iter()
            .filter(|n| n.degree >= params.min_degree)
            .cloned()
            .collect();
        sort_by_degree(&mut central);
        central.truncate(params.max_count);
    }
    sort_by_degree(&mut central);
    central
}
