use std::collections::VecDeque;

use crate::gene::Gene;
use crate::hin::{Hin, RelId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    /// Gene position bound at this step.
    pub node: usize,
    /// Already-bound position and relation used to extend; `None` for the root.
    pub parent: Option<(usize, RelId)>,
    /// Already-bound positions that must be adjacent to this binding.
    pub checks: Vec<(usize, RelId)>,
}

/// Spanning-tree visit order over a gene. Non-tree edges become junction
/// checks on the later of their two endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchPlan {
    pub steps: Vec<PlanStep>,
}

impl MatchPlan {
    pub fn extensions(&self) -> usize {
        self.steps.iter().filter(|s| s.parent.is_some()).count()
    }

    pub fn junction_checks(&self) -> usize {
        self.steps.iter().map(|s| s.checks.len()).sum()
    }
}

/// Roots the plan at the position whose type has the largest total degree in
/// `hin` (lowest position on ties), then visits breadth-first.
pub fn plan(gene: &Gene, hin: &Hin) -> MatchPlan {
    let schema = hin.schema();
    let n = gene.len();
    let types = gene.types();
    let root = (0..n)
        .max_by(|&a, &b| {
            hin.type_degree(types[a])
                .cmp(&hin.type_degree(types[b]))
                .then(b.cmp(&a))
        })
        .expect("non-empty gene");
    let rel = |a: usize, b: usize| {
        schema
            .relation_between(types[a], types[b])
            .expect("present gene edge joins related types")
    };

    let mut visited = vec![false; n];
    let mut steps = Vec::with_capacity(n);
    let mut queue = VecDeque::from([(root, None)]);
    visited[root] = true;
    while let Some((node, parent)) = queue.pop_front() {
        let checks = (0..n)
            .filter(|&u| {
                gene.has_edge(u, node)
                    && steps.iter().any(|s: &PlanStep| s.node == u)
                    && parent.is_none_or(|p: (usize, RelId)| p.0 != u)
            })
            .map(|u| (u, rel(u, node)))
            .collect();
        steps.push(PlanStep { node, parent, checks });
        for u in gene.neighbors(node) {
            if !visited[u] {
                visited[u] = true;
                queue.push_back((u, Some((node, rel(node, u)))));
            }
        }
    }
    // positions unreachable from the root (invalid genes) are bound unconstrained
    MatchPlan { steps }
}
