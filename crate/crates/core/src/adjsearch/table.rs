use std::fmt::Write as _;

use crate::gene::GeneKey;
use crate::hin::{NodeId, Side};

/// Per-node neighbor lists induced by one gene, seen from one endpoint.
/// Lists keep multiplicity and are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    pub gene_key: GeneKey,
    pub side: Side,
    pub sample_cap: Option<usize>,
    neighbors: Vec<Vec<NodeId>>,
}

impl NeighborTable {
    pub fn new(gene_key: GeneKey, side: Side, sample_cap: Option<usize>, mut neighbors: Vec<Vec<NodeId>>) -> Self {
        for l in &mut neighbors {
            l.sort_unstable();
        }
        NeighborTable {
            gene_key,
            side,
            sample_cap,
            neighbors,
        }
    }

    pub fn get(&self, node: NodeId) -> &[NodeId] {
        self.neighbors.get(node as usize).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.iter().all(Vec::is_empty)
    }

    pub fn total_entries(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn lists(&self) -> &[Vec<NodeId>] {
        &self.neighbors
    }

    /// `# <gene key>` header, then `node<TAB>id,id,...` for every node.
    pub fn export(&self) -> String {
        let mut out = format!("# {}\n", self.gene_key);
        for (node, list) in self.neighbors.iter().enumerate() {
            let ids: Vec<String> = list.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{node}\t{}", ids.join(","));
        }
        out
    }
}

/// The two tables one gene induces: source nodes to sink nodes, and sink
/// nodes back to source nodes, built from the same instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceTables {
    pub source: NeighborTable,
    pub sink: NeighborTable,
}

impl InstanceTables {
    pub fn side(&self, side: Side) -> &NeighborTable {
        match side {
            Side::Source => &self.source,
            Side::Sink => &self.sink,
        }
    }
}
