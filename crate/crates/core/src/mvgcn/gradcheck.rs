use rand::distributions::{Distribution, Uniform};
use rand::Rng as _;

use super::objective::{batch_loss, batch_loss_grad, Example, LossConfig};
use super::params::{init_params, EndpointSizes, ModelParams};
use crate::adjsearch::{InstanceTables, NeighborTable};
use crate::gene::GeneKey;
use crate::hin::{NodeId, Side};
use crate::optim::Parameters;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)` over every parameter.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Distance of the evaluation point to the nearest hinge or ReLU kink.
    pub kink_distance: f64,
    pub checked: usize,
}

/// Batches whose kink distance is below this are too close to a kink for a
/// step of 1e-5 to be trusted.
pub const KINK_MARGIN: f64 = 1e-4;

impl GradCheck {
    pub fn near_kink(&self) -> bool {
        self.kink_distance <= KINK_MARGIN
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central differences of step `h` against the analytic gradient.
pub fn grad_check(p: &ModelParams, tables: &[InstanceTables], batch: &[Example], cfg: LossConfig, h: f64) -> GradCheck {
    let (loss, g) = batch_loss_grad(p, tables, batch, cfg);
    let analytic: Vec<f64> = g.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let mut probe = p.clone();
    let mut max_err: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut flat = 0;
    let shapes: Vec<usize> = p.slices().iter().map(|s| s.len()).collect();
    for (si, &len) in shapes.iter().enumerate() {
        for k in 0..len {
            let orig = probe.slices()[si][k];
            probe.slices_mut()[si][k] = orig + h;
            let up = batch_loss(&probe, tables, batch, cfg).total;
            probe.slices_mut()[si][k] = orig - h;
            let down = batch_loss(&probe, tables, batch, cfg).total;
            probe.slices_mut()[si][k] = orig;
            let numeric = (up - down) / (2.0 * h);
            max_err = max_err.max(relative_error(analytic[flat], numeric));
            max_abs = max_abs.max((analytic[flat] - numeric).abs());
            flat += 1;
        }
    }
    GradCheck {
        max_rel_error: max_err,
        max_abs_error: max_abs,
        kink_distance: loss.kink_distance,
        checked: flat,
    }
}

/// A tiny random model, neighbor tables and batch for gradient checking.
#[derive(Debug, Clone)]
pub struct MicroInstance {
    pub params: ModelParams,
    pub tables: Vec<InstanceTables>,
    pub batch: Vec<Example>,
    pub cfg: LossConfig,
}

pub fn random_micro_instance(dim: usize, views: usize, seed: u64) -> MicroInstance {
    let mut rng = seed::rng(seed);
    let shared = rng.gen_bool(0.25);
    let sizes = EndpointSizes {
        source: 4,
        sink: if shared { 4 } else { 5 },
        shared,
    };
    let keys: Vec<GeneKey> = (0..views).map(|i| GeneKey::from_raw(format!("micro{i}"))).collect();
    let mut params = init_params(sizes, dim, keys.clone(), rng.gen());
    let spread = Uniform::new_inclusive(-0.5, 0.5);
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            *v = spread.sample(&mut rng);
        }
    }
    let lists = |n: usize, targets: usize, rng: &mut seed::Rng| -> Vec<Vec<NodeId>> {
        (0..n)
            .map(|_| (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..targets as NodeId)).collect())
            .collect()
    };
    let tables = keys
        .iter()
        .map(|k| InstanceTables {
            source: NeighborTable::new(k.clone(), Side::Source, None, lists(sizes.source, sizes.sink, &mut rng)),
            sink: NeighborTable::new(k.clone(), Side::Sink, None, lists(sizes.sink, sizes.source, &mut rng)),
        })
        .collect();
    let batch = (0..3)
        .map(|_| {
            let positive = rng.gen_range(0..sizes.sink as NodeId);
            Example {
                user: rng.gen_range(0..sizes.source as NodeId),
                positive,
                negatives: (0..2)
                    .map(|_| loop {
                        let j = rng.gen_range(0..sizes.sink as NodeId);
                        if j != positive {
                            break j;
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    MicroInstance {
        params,
        tables,
        batch,
        cfg: LossConfig {
            margin: 0.3,
            l2: 0.05,
            l2_scale: 1.0,
        },
    }
}

impl MicroInstance {
    pub fn check(&self, h: f64) -> GradCheck {
        grad_check(&self.params, &self.tables, &self.batch, self.cfg, h)
    }
}
