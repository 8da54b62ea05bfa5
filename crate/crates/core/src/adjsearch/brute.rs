use std::collections::HashSet;

use super::{InstanceTables, NeighborTable};
use crate::gene::Gene;
use crate::hin::{Hin, NodeId, RelId, Side, TypeId};

/// Exhaustive reference enumeration. Positions are bound in index order,
/// each trying every node of its type, and every gene edge to an earlier
/// position is checked against the raw edge list. Shares no traversal code
/// with [`super::materialize`].
pub fn brute_force_instances(gene: &Gene, hin: &Hin) -> InstanceTables {
    let schema = hin.schema();
    let target = schema.target();
    let mut edge_set: HashSet<(RelId, TypeId, NodeId, NodeId)> = HashSet::new();
    for (r, rel) in schema.relations().iter().enumerate() {
        for &(x, y) in hin.edges(r) {
            edge_set.insert((r, rel.a, x, y));
            edge_set.insert((r, rel.b, y, x));
        }
    }
    let n = gene.len();
    let types = gene.types();
    // earlier[p] = gene edges from position p back to positions q < p
    let earlier: Vec<Vec<(usize, RelId)>> = (0..n)
        .map(|p| {
            (0..p)
                .filter(|&q| gene.has_edge(q, p))
                .map(|q| (q, schema.relation_between(types[q], types[p]).unwrap()))
                .collect()
        })
        .collect();

    let mut source = vec![Vec::new(); hin.node_count(target.source)];
    let mut sink = vec![Vec::new(); hin.node_count(target.sink)];
    let mut bind = vec![0 as NodeId; n];

    fn rec(
        p: usize,
        bind: &mut Vec<NodeId>,
        types: &[TypeId],
        earlier: &[Vec<(usize, RelId)>],
        edge_set: &HashSet<(RelId, TypeId, NodeId, NodeId)>,
        hin: &Hin,
        source: &mut [Vec<NodeId>],
        sink: &mut [Vec<NodeId>],
    ) {
        if p == types.len() {
            source[bind[0] as usize].push(bind[1]);
            sink[bind[1] as usize].push(bind[0]);
            return;
        }
        for c in 0..hin.node_count(types[p]) as NodeId {
            if earlier[p]
                .iter()
                .all(|&(q, r)| edge_set.contains(&(r, types[p], c, bind[q])))
            {
                bind[p] = c;
                rec(p + 1, bind, types, earlier, edge_set, hin, source, sink);
            }
        }
    }
    if n >= 2 {
        rec(0, &mut bind, types, &earlier, &edge_set, hin, &mut source, &mut sink);
    }

    let key = gene.canonical_key(schema);
    InstanceTables {
        source: NeighborTable::new(key.clone(), Side::Source, None, source),
        sink: NeighborTable::new(key, Side::Sink, None, sink),
    }
}
