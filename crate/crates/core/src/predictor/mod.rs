//! Surrogate that estimates an individual's normalized fitness from its gene
//! graphs, trained on the history of real evaluations.

mod history;
mod model;

pub use history::{filter_threshold, normalize_metric, quantile, spearman, train_predictor, HistoryRecord, HistoryStore};
pub use model::{fit, init_predictor, mse, mse_grad, predict, PredictorParams, HIDDEN_DIM, ROUNDS, STATE_DIM};

use rand::Rng as _;

use crate::evolve::random_gene;
use crate::gene::Gene;
use crate::hin::Schema;
use crate::mvgcn::{relative_error, GradCheck};
use crate::optim::Parameters;
use crate::seed;

/// Central-difference check of [`mse_grad`], same error measure as the
/// ranking model's check.
pub fn grad_check(p: &PredictorParams, data: &[(Vec<Gene>, f64)], h: f64) -> GradCheck {
    let (_, g) = mse_grad(p, data);
    let analytic: Vec<f64> = g.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let mut probe = p.clone();
    let (mut max_rel, mut max_abs): (f64, f64) = (0.0, 0.0);
    let mut flat = 0;
    let lens: Vec<usize> = p.slices().iter().map(|s| s.len()).collect();
    for (si, &len) in lens.iter().enumerate() {
        for k in 0..len {
            let orig = probe.slices()[si][k];
            probe.slices_mut()[si][k] = orig + h;
            let up = mse(&probe, data);
            probe.slices_mut()[si][k] = orig - h;
            let down = mse(&probe, data);
            probe.slices_mut()[si][k] = orig;
            let numeric = (up - down) / (2.0 * h);
            max_rel = max_rel.max(relative_error(analytic[flat], numeric));
            max_abs = max_abs.max((analytic[flat] - numeric).abs());
            flat += 1;
        }
    }
    GradCheck {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        kink_distance: kink_distance(p, data),
        checked: flat,
    }
}

fn kink_distance(p: &PredictorParams, data: &[(Vec<Gene>, f64)]) -> f64 {
    model::pre_activations(p, data).into_iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Random predictor parameters and a few random individuals with random
/// targets.
pub fn random_micro_history(schema: &Schema, seed: u64) -> (PredictorParams, Vec<(Vec<Gene>, f64)>) {
    let mut rng = seed::rng(seed);
    let params = init_predictor(schema.type_count(), rng.gen());
    let data = (0..3)
        .map(|_| {
            let genes = (0..rng.gen_range(1..=3)).map(|_| random_gene(schema, 5, &mut rng)).collect();
            (genes, rng.gen_range(-1.0..1.0))
        })
        .collect();
    (params, data)
}

/// Individuals of random genes whose target is a fixed function of their mean
/// node count, split into train and held-out halves.
pub fn node_count_task(schema: &Schema, size: usize, genes_per: usize, seed: u64) -> (Vec<(Vec<Gene>, f64)>, Vec<(Vec<Gene>, f64)>) {
    let mut rng = seed::rng(seed);
    let mut data: Vec<(Vec<Gene>, f64)> = (0..size)
        .map(|_| {
            let genes: Vec<Gene> = (0..genes_per).map(|_| random_gene(schema, crate::gene::MAX_NODES, &mut rng)).collect();
            let mean = genes.iter().map(Gene::len).sum::<usize>() as f64 / genes.len() as f64;
            let target = (mean - 2.0) / (crate::gene::MAX_NODES as f64 - 2.0) * 2.0 - 1.0;
            (genes, target)
        })
        .collect();
    let held = data.split_off(size / 2);
    (data, held)
}
