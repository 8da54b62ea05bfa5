use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::NodeId;
use crate::error::{Error, Result};

/// Draws negative sink nodes with probability proportional to
/// `frequency^exponent`, rejecting excluded ids.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    weights: Vec<f64>,
    dist: Option<WeightedIndex<f64>>,
}

impl NegativeSampler {
    pub fn new(frequency: &[u32], exponent: f64) -> Self {
        let weights: Vec<f64> = frequency
            .iter()
            .map(|&f| if f == 0 { 0.0 } else { (f as f64).powf(exponent) })
            .collect();
        let dist = WeightedIndex::new(&weights).ok();
        NegativeSampler { weights, dist }
    }

    pub fn n_items(&self) -> usize {
        self.weights.len()
    }

    /// `k` draws with replacement, none in `exclude` (which must be sorted).
    /// Falls back to uniform over non-excluded items when they carry no
    /// frequency mass.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, exclude: &[NodeId], rng: &mut R) -> Result<Vec<NodeId>> {
        debug_assert!(exclude.windows(2).all(|w| w[0] <= w[1]));
        let excluded = |i: usize| exclude.binary_search(&(i as NodeId)).is_ok();
        let n = self.weights.len();
        let distinct_excluded = {
            let mut d = exclude.to_vec();
            d.dedup();
            d.into_iter().filter(|&i| (i as usize) < n).count()
        };
        if distinct_excluded >= n {
            return Err(Error::Sampling("every item is excluded".into()));
        }
        let free_mass: f64 = self
            .weights
            .iter()
            .enumerate()
            .filter(|(i, _)| !excluded(*i))
            .map(|(_, w)| w)
            .sum();

        let mut out = Vec::with_capacity(k);
        match &self.dist {
            Some(dist) if free_mass > 0.0 => {
                let total: f64 = self.weights.iter().sum();
                if free_mass / total > 0.05 {
                    while out.len() < k {
                        let i = dist.sample(rng);
                        if !excluded(i) {
                            out.push(i as NodeId);
                        }
                    }
                } else {
                    // rejection would be slow; sample the restricted law directly
                    let restricted: Vec<f64> = self
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(i, &w)| if excluded(i) { 0.0 } else { w })
                        .collect();
                    let d = WeightedIndex::new(&restricted).expect("positive free mass");
                    out.extend((0..k).map(|_| d.sample(rng) as NodeId));
                }
            }
            _ => {
                let free: Vec<NodeId> = (0..n).filter(|&i| !excluded(i)).map(|i| i as NodeId).collect();
                out.extend((0..k).map(|_| free[rng.gen_range(0..free.len())]));
            }
        }
        Ok(out)
    }
}
