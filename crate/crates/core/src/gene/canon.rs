use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::Gene;
use crate::hin::Schema;

/// Canonical string form of a gene: equal for two genes exactly when they
/// are isomorphic as typed graphs with positions 0 and 1 pinned.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneKey(String);

impl GeneKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn from_raw(s: impl Into<String>) -> Self {
        GeneKey(s.into())
    }
}

impl fmt::Display for GeneKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Gene {
    /// Lexicographically smallest serialization over all orderings of the
    /// non-target positions.
    pub fn canonical_key(&self, schema: &Schema) -> GeneKey {
        GeneKey(self.canonical_form(schema).to_string_with(schema))
    }

    /// The relabeled gene whose serialization is the canonical key.
    pub fn canonical_form(&self, schema: &Schema) -> Gene {
        let n = self.len();
        if n <= 3 {
            return self.clone();
        }
        let mut best: Option<(String, Gene)> = None;
        for perm in (2..n).permutations(n - 2) {
            let order: Vec<usize> = [0, 1].into_iter().chain(perm).collect();
            let mut g = self.clone();
            g.reindex(&order);
            let s = g.to_string_with(schema);
            if best.as_ref().is_none_or(|(b, _)| s < *b) {
                best = Some((s, g));
            }
        }
        best.unwrap().1
    }
}
