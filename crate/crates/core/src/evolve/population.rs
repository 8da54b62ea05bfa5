use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};

/// Per gene slot, with probability `p_swap` exchanges that slot between a
/// random pair of individuals. Genes themselves are never modified.
pub fn crossover<G, R: Rng + ?Sized>(individuals: &mut [Vec<G>], p_swap: f64, rng: &mut R) {
    let n = individuals.len();
    if n < 2 {
        return;
    }
    let k = individuals[0].len();
    debug_assert!(individuals.iter().all(|i| i.len() == k));
    for slot in 0..k {
        if !rng.gen_bool(p_swap) {
            continue;
        }
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (left, right) = individuals.split_at_mut(hi);
        std::mem::swap(&mut left[lo][slot], &mut right[0][slot]);
    }
}

/// Indices of the top `ceil(fraction * N)` individuals, best first; ties go
/// to the lower index.
pub fn eliminate(fitness: &[f64], survive_fraction: f64) -> Result<Vec<usize>> {
    if fitness.is_empty() {
        return Err(Error::Validation("cannot eliminate from an empty population".into()));
    }
    let keep = ((survive_fraction * fitness.len() as f64).ceil() as usize).clamp(1, fitness.len());
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    order.truncate(keep);
    Ok(order)
}

/// Keeps every survivor and fills up to `target_size` with copies drawn with
/// probability proportional to `fitness - min + eps`.
pub fn reproduce<T: Clone, R: Rng + ?Sized>(
    survivors: &[T],
    fitness: &[f64],
    target_size: usize,
    eps: f64,
    rng: &mut R,
) -> Vec<T> {
    assert!(!survivors.is_empty(), "reproduce needs at least one survivor");
    assert_eq!(survivors.len(), fitness.len());
    let mut out = survivors.to_vec();
    if target_size <= survivors.len() {
        return out;
    }
    let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = fitness.iter().map(|f| f - min + eps).collect();
    let dist = WeightedIndex::new(&weights).expect("shifted weights are positive");
    while out.len() < target_size {
        out.push(survivors[dist.sample(rng)].clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn no_swaps_at_zero() {
        let mut pop = vec![vec![1, 2], vec![3, 4]];
        crossover(&mut pop, 0.0, &mut seed::rng(0));
        assert_eq!(pop, vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn every_slot_swaps_at_one() {
        let mut pop = vec![vec![1, 2, 3], vec![4, 5, 6]];
        crossover(&mut pop, 1.0, &mut seed::rng(0));
        assert_eq!(pop, vec![vec![4, 5, 6], vec![1, 2, 3]]);
    }

    #[test]
    fn singleton_population_untouched() {
        let mut pop = vec![vec![1, 2]];
        crossover(&mut pop, 1.0, &mut seed::rng(0));
        assert_eq!(pop, vec![vec![1, 2]]);
    }

    #[test]
    fn multiset_preserved() {
        let mut rng = seed::rng(9);
        for trial in 0..100 {
            let mut pop: Vec<Vec<u32>> = (0..20).map(|i| (0..5).map(|s| i * 10 + s + trial).collect()).collect();
            let mut before: Vec<u32> = pop.iter().flatten().copied().collect();
            crossover(&mut pop, 0.5, &mut rng);
            let mut after: Vec<u32> = pop.iter().flatten().copied().collect();
            before.sort();
            after.sort();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn eliminate_keeps_best() {
        let mut kept = eliminate(&[0.3, 0.1, 0.2, 0.4], 0.5).unwrap();
        assert_eq!(kept, vec![3, 0]);
        kept = eliminate(&[0.5; 6], 0.5).unwrap();
        assert_eq!(kept, vec![0, 1, 2]);
        assert_eq!(eliminate(&[0.1, 0.9, 0.5], 1.0).unwrap(), vec![1, 2, 0]);
        assert!(eliminate(&[], 0.5).is_err());
    }

    #[test]
    fn reproduce_single_survivor() {
        let out = reproduce(&["a"], &[0.4], 20, 1e-6, &mut seed::rng(0));
        assert_eq!(out, vec!["a"; 20]);
    }

    #[test]
    fn reproduce_at_size_is_identity() {
        let out = reproduce(&[1, 2], &[0.1, 0.2], 2, 1e-6, &mut seed::rng(0));
        assert_eq!(out, vec![1, 2]);
    }

    #[test]
    fn shifted_proportional_copies() {
        // weights 0.8 + 1e-6 and 1e-6
        let mut rng = seed::rng(4);
        let mut first = 0usize;
        let fills = 10_000;
        for _ in 0..fills {
            let out = reproduce(&[0u8, 1u8], &[0.9, 0.1], 3, 1e-6, &mut rng);
            first += (out[2] == 0) as usize;
        }
        let p = first as f64 / fills as f64;
        let expected = (0.8 + 1e-6) / (0.8 + 2e-6);
        assert!((p - expected).abs() < 1e-3, "{p}");
    }
}
