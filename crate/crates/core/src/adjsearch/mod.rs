//! Materializes the neighbor table a meta-structure induces: every instance
//! of the gene in the graph contributes its (source binding, sink binding)
//! pair. Matching is homomorphic, so two gene positions of the same type may
//! bind the same graph node.

mod brute;
mod plan;
mod sampled;
mod table;

use std::sync::Arc;

pub use brute::brute_force_instances;
pub use plan::{plan, MatchPlan, PlanStep};
pub use sampled::materialize;
pub use table::{InstanceTables, NeighborTable};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gene::Gene;
use crate::hin::Hin;
use crate::registry::{Named, Registry};

/// Sampling limits. `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCaps {
    /// Candidates kept per extension step.
    pub expansion: Option<usize>,
    /// Entries kept per node in each table.
    pub per_node: Option<usize>,
}

impl Default for MatchCaps {
    fn default() -> Self {
        MatchCaps {
            expansion: Some(20),
            per_node: Some(50),
        }
    }
}

impl MatchCaps {
    pub const UNBOUNDED: MatchCaps = MatchCaps {
        expansion: None,
        per_node: None,
    };
}

/// A strategy that turns a gene into neighbor tables for both endpoints.
pub trait InstanceMatcher: Named + Send + Sync {
    fn materialize(&self, gene: &Gene, hin: &Hin, caps: MatchCaps, seed: u64) -> InstanceTables;
}

/// Plan-driven DFS with per-expansion subsampling.
pub struct SampledMatcher;

impl Named for SampledMatcher {
    fn name(&self) -> &'static str {
        "sampled"
    }
}

impl InstanceMatcher for SampledMatcher {
    fn materialize(&self, gene: &Gene, hin: &Hin, caps: MatchCaps, seed: u64) -> InstanceTables {
        materialize(gene, hin, caps, seed)
    }
}

/// Exhaustive enumeration. Ignores caps; intended for small graphs.
pub struct BruteForceMatcher;

impl Named for BruteForceMatcher {
    fn name(&self) -> &'static str {
        "brute-force"
    }
}

impl InstanceMatcher for BruteForceMatcher {
    fn materialize(&self, gene: &Gene, hin: &Hin, _caps: MatchCaps, _seed: u64) -> InstanceTables {
        brute_force_instances(gene, hin)
    }
}

pub fn matchers() -> Registry<dyn InstanceMatcher> {
    let mut r: Registry<dyn InstanceMatcher> = Registry::new("instance matcher");
    r.register(Arc::new(SampledMatcher))
        .register(Arc::new(BruteForceMatcher));
    r
}

pub fn matcher(name: &str) -> Result<Arc<dyn InstanceMatcher>> {
    matchers().get(name)
}
