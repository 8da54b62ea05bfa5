use rand::seq::index;
use rand::Rng as _;

use super::plan::{plan, MatchPlan};
use super::{InstanceTables, MatchCaps, NeighborTable};
use crate::gene::Gene;
use crate::hin::{Hin, NodeId, Side};
use crate::seed::{self, Rng};

/// Uniform reservoir over a stream of ids.
struct Reservoir {
    items: Vec<NodeId>,
    seen: u64,
}

impl Reservoir {
    fn offer(&mut self, id: NodeId, cap: Option<usize>, rng: &mut Rng) {
        self.seen += 1;
        match cap {
            Some(c) if self.items.len() >= c => {
                let j = rng.gen_range(0..self.seen);
                if (j as usize) < c {
                    self.items[j as usize] = id;
                }
            }
            _ => self.items.push(id),
        }
    }
}

struct Walk<'a> {
    gene: &'a Gene,
    hin: &'a Hin,
    plan: MatchPlan,
    caps: MatchCaps,
    rng: Rng,
    bindings: Vec<NodeId>,
    source: Vec<Reservoir>,
    sink: Vec<Reservoir>,
}

impl Walk<'_> {
    fn extend(&mut self, step: usize) {
        if step == self.plan.steps.len() {
            let (s, t) = (self.bindings[0], self.bindings[1]);
            let cap = self.caps.per_node;
            self.source[s as usize].offer(t, cap, &mut self.rng);
            self.sink[t as usize].offer(s, cap, &mut self.rng);
            return;
        }
        let types = self.gene.types();
        let node = self.plan.steps[step].node;
        let candidates: Vec<NodeId> = match self.plan.steps[step].parent {
            Some((parent, rel)) => {
                let all = self.hin.neighbors(rel, types[parent], self.bindings[parent]);
                match self.caps.expansion {
                    Some(cap) if all.len() > cap => index::sample(&mut self.rng, all.len(), cap)
                        .into_iter()
                        .map(|k| all[k])
                        .collect(),
                    _ => all.to_vec(),
                }
            }
            None => (0..self.hin.node_count(types[node]) as NodeId).collect(),
        };
        for c in candidates {
            let ok = self.plan.steps[step]
                .checks
                .iter()
                .all(|&(other, rel)| self.hin.has_edge(rel, types[node], c, self.bindings[other]));
            if ok {
                self.bindings[node] = c;
                self.extend(step + 1);
            }
        }
    }
}

/// Sampled instance matching along [`plan`]. With unbounded caps this
/// enumerates every instance.
pub fn materialize(gene: &Gene, hin: &Hin, caps: MatchCaps, seed: u64) -> InstanceTables {
    let schema = hin.schema();
    let target = schema.target();
    let key = gene.canonical_key(schema);
    let n_src = hin.node_count(target.source);
    let n_sink = hin.node_count(target.sink);
    let reservoirs = |n| {
        (0..n)
            .map(|_| Reservoir {
                items: Vec::new(),
                seen: 0,
            })
            .collect::<Vec<_>>()
    };
    let mut walk = Walk {
        gene,
        hin,
        plan: plan(gene, hin),
        caps,
        rng: seed::rng(seed),
        bindings: vec![0; gene.len()],
        source: reservoirs(n_src),
        sink: reservoirs(n_sink),
    };
    walk.extend(0);
    let collect = |r: Vec<Reservoir>| r.into_iter().map(|r| r.items).collect::<Vec<_>>();
    InstanceTables {
        source: NeighborTable::new(key.clone(), Side::Source, caps.per_node, collect(walk.source)),
        sink: NeighborTable::new(key, Side::Sink, caps.per_node, collect(walk.sink)),
    }
}
