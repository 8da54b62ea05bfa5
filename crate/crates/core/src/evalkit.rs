//! HR@K, MRR@K and NDCG@K of a single positive ranked against sampled
//! negatives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{InteractionDataset, NegativeSampler, NodeId, Split};
use crate::seed::{self, derive_seed};

/// Negatives drawn per evaluation record.
pub const EVAL_NEGATIVES: usize = 100;

/// Anything that can score a (source, sink) pair. Higher ranks first.
pub trait Scorer: Sync {
    fn score(&self, user: NodeId, item: NodeId) -> f64;
}

impl<F: Fn(NodeId, NodeId) -> f64 + Sync> Scorer for F {
    fn score(&self, user: NodeId, item: NodeId) -> f64 {
        self(user, item)
    }
}

/// Scores every pair with an independent uniform draw keyed by (seed, pair).
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, user: NodeId, item: NodeId) -> f64 {
        (derive_seed(self.seed, &[(user as u64).into(), (item as u64).into()]) >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// 1-based rank of `positive` under descending score. Ties go to the lower
/// item id.
pub fn rank_of_positive(scores: &[(NodeId, f64)], positive: NodeId) -> Result<usize> {
    let mut pos_score = None;
    for &(id, s) in scores {
        if id == positive {
            if pos_score.is_some() {
                return Err(Error::Validation(format!("positive {positive} listed twice")));
            }
            pos_score = Some(s);
        }
    }
    let ps = pos_score.ok_or_else(|| Error::Validation(format!("positive {positive} not among candidates")))?;
    let ahead = scores
        .iter()
        .filter(|&&(id, s)| id != positive && (s > ps || (s == ps && id < positive)))
        .count();
    Ok(ahead + 1)
}

pub fn hr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

pub fn mrr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / rank as f64
    } else {
        0.0
    }
}

/// Single relevant item, so the ideal DCG is 1.
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// Expected NDCG@k when the positive's rank is uniform over `candidates`
/// positions.
pub fn uniform_rank_ndcg(k: usize, candidates: usize) -> f64 {
    (1..=k.min(candidates)).map(|r| ndcg_at_k(r, k)).sum::<f64>() / candidates as f64
}

/// Neumaier summation over values sorted first, so the result does not depend
/// on input order.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRecord {
    pub user: NodeId,
    pub positive: NodeId,
    pub negatives: Vec<NodeId>,
}

/// Evaluation records with their negatives fixed up front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    pub records: Vec<EvalRecord>,
}

impl EvalSet {
    /// Negatives are frequency-proportional, exclude every known positive of
    /// the user, and are drawn from a stream keyed by (seed, user, positive)
    /// so a record's negatives do not depend on its position.
    pub fn build(ds: &InteractionDataset, split: Split, n_negatives: usize, seed: u64) -> Result<EvalSet> {
        let sampler = NegativeSampler::new(ds.item_frequency(), 1.0);
        let records = ds
            .records(split)
            .map(|(user, positive)| {
                let mut rng = seed::rng_from(seed, &["eval-negatives".into(), (user as u64).into(), (positive as u64).into()]);
                let negatives = sampler.sample(n_negatives, ds.known_positives(user), &mut rng)?;
                Ok(EvalRecord {
                    user,
                    positive,
                    negatives,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalSet { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ranks<S: Scorer + ?Sized>(&self, scorer: &S) -> Vec<usize> {
        self.records
            .par_iter()
            .map(|r| {
                let mut scores = Vec::with_capacity(r.negatives.len() + 1);
                scores.push((r.positive, scorer.score(r.user, r.positive)));
                scores.extend(r.negatives.iter().map(|&n| (n, scorer.score(r.user, n))));
                rank_of_positive(&scores, r.positive).expect("positive is never sampled as a negative")
            })
            .collect()
    }

    pub fn evaluate<S: Scorer + ?Sized>(&self, scorer: &S) -> RankingMetrics {
        RankingMetrics::from_ranks(&self.ranks(scorer))
    }

    pub fn ndcg_at_10<S: Scorer + ?Sized>(&self, scorer: &S) -> f64 {
        let ranks = self.ranks(scorer);
        mean(&ranks.iter().map(|&r| ndcg_at_k(r, 10)).collect::<Vec<_>>())
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        stable_sum(values) / values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    #[serde(rename = "HR@3")]
    pub hr3: f64,
    #[serde(rename = "MRR@10")]
    pub mrr10: f64,
    #[serde(rename = "NDCG@10")]
    pub ndcg10: f64,
    #[serde(rename = "MRR@50")]
    pub mrr50: f64,
    #[serde(rename = "NDCG@50")]
    pub ndcg50: f64,
    pub records: usize,
}

impl RankingMetrics {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let avg = |f: &dyn Fn(usize) -> f64| mean(&ranks.iter().map(|&r| f(r)).collect::<Vec<_>>());
        RankingMetrics {
            hr3: avg(&|r| hr_at_k(r, 3)),
            mrr10: avg(&|r| mrr_at_k(r, 10)),
            ndcg10: avg(&|r| ndcg_at_k(r, 10)),
            mrr50: avg(&|r| mrr_at_k(r, 50)),
            ndcg50: avg(&|r| ndcg_at_k(r, 50)),
            records: ranks.len(),
        }
    }
}

/// Samples [`EVAL_NEGATIVES`] negatives per record of `split` and averages
/// each metric over records.
pub fn evaluate_model<S: Scorer + ?Sized>(
    scorer: &S,
    ds: &InteractionDataset,
    split: Split,
    seed: u64,
) -> Result<RankingMetrics> {
    let set = EvalSet::build(ds, split, EVAL_NEGATIVES, seed)?;
    if set.is_empty() {
        return Err(Error::Validation(format!("split {split:?} has no records")));
    }
    Ok(set.evaluate(scorer))
}
