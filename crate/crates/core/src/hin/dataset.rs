use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Hin, NodeId};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("split ratios must be non-negative".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split ratios must sum to 1".into()));
        }
        Ok(())
    }
}

/// Positive (source, sink) interactions taken from the target relation, each
/// tagged with its split.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    positives: Vec<(NodeId, NodeId)>,
    split: Vec<Split>,
    item_frequency: Vec<u32>,
    user_positives: Vec<Vec<NodeId>>,
    user_train: Vec<Vec<NodeId>>,
}

impl InteractionDataset {
    pub fn positives(&self) -> &[(NodeId, NodeId)] {
        &self.positives
    }

    pub fn split_tags(&self) -> &[Split] {
        &self.split
    }

    pub fn records(&self, which: Split) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.positives
            .iter()
            .zip(&self.split)
            .filter(move |(_, s)| **s == which)
            .map(|(p, _)| *p)
    }

    pub fn count(&self, which: Split) -> usize {
        self.split.iter().filter(|s| **s == which).count()
    }

    /// Occurrences of each sink node among train positives.
    pub fn item_frequency(&self) -> &[u32] {
        &self.item_frequency
    }

    pub fn n_users(&self) -> usize {
        self.user_positives.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_frequency.len()
    }

    /// All known positives of a user across every split, sorted.
    pub fn known_positives(&self, user: NodeId) -> &[NodeId] {
        &self.user_positives[user as usize]
    }

    /// Train positives of a user, sorted.
    pub fn train_positives(&self, user: NodeId) -> &[NodeId] {
        &self.user_train[user as usize]
    }
}

/// Global random split of the target relation's edges. The permutation is a
/// pure function of (edge list, ratios, seed).
pub fn split_dataset(hin: &Hin, ratios: SplitRatios, seed: u64) -> Result<InteractionDataset> {
    ratios.validate()?;
    let target = hin.schema().target();
    let rel = hin.schema().relation(target.relation);
    // orient every positive as (source id, sink id)
    let positives: Vec<(NodeId, NodeId)> = hin
        .edges(target.relation)
        .iter()
        .map(|&(x, y)| if rel.a == target.source { (x, y) } else { (y, x) })
        .collect();
    let n = positives.len();
    if n < 10 {
        return Err(Error::Validation(format!(
            "only {n} target edges; at least 10 are needed for a split"
        )));
    }

    let n_train = (ratios.train * n as f64).round() as usize;
    let n_val = ((ratios.val * n as f64).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut split = vec![Split::Test; n];
    for (rank, &idx) in order.iter().enumerate() {
        split[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let n_users = hin.node_count(target.source);
    let n_items = hin.node_count(target.sink);
    let mut item_frequency = vec![0u32; n_items];
    let mut user_positives = vec![Vec::new(); n_users];
    let mut user_train = vec![Vec::new(); n_users];
    for (&(u, i), &s) in positives.iter().zip(&split) {
        user_positives[u as usize].push(i);
        if s == Split::Train {
            item_frequency[i as usize] += 1;
            user_train[u as usize].push(i);
        }
    }
    for l in user_positives.iter_mut().chain(user_train.iter_mut()) {
        l.sort_unstable();
    }

    Ok(InteractionDataset {
        positives,
        split,
        item_frequency,
        user_positives,
        user_train,
    })
}
