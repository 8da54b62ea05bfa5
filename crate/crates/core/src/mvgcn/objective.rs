use std::collections::BTreeMap;

use ndarray::Array1;

use super::forward::{node_backward, node_forward, sigmoid, NodeForward};
use super::params::ModelParams;
use crate::adjsearch::InstanceTables;
use crate::hin::{NodeId, Side};
use crate::optim::Parameters;

/// One positive pair with its sampled negative sinks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub user: NodeId,
    pub positive: NodeId,
    pub negatives: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub margin: f64,
    pub l2: f64,
    /// Multiplies the L2 term, so that per-batch penalties sum to one full
    /// penalty per epoch.
    pub l2_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    /// Margin loss plus penalty.
    pub total: f64,
    pub margin: f64,
    /// Smallest distance of any hinge or ReLU input to its kink.
    pub kink_distance: f64,
}

fn key(side: Side, node: NodeId) -> (u8, NodeId) {
    (side as u8, node)
}

fn side_of(k: u8) -> Side {
    if k == Side::Source as u8 {
        Side::Source
    } else {
        Side::Sink
    }
}

struct Pass {
    nodes: BTreeMap<(u8, NodeId), NodeForward>,
}

impl Pass {
    fn run(p: &ModelParams, tables: &[InstanceTables], batch: &[Example]) -> Pass {
        let mut nodes = BTreeMap::new();
        for ex in batch {
            nodes.entry(key(Side::Source, ex.user)).or_insert_with(|| node_forward(p, tables, Side::Source, ex.user));
            for &i in std::iter::once(&ex.positive).chain(&ex.negatives) {
                nodes.entry(key(Side::Sink, i)).or_insert_with(|| node_forward(p, tables, Side::Sink, i));
            }
        }
        Pass { nodes }
    }

    fn y(&self, side: Side, node: NodeId) -> &Array1<f64> {
        &self.nodes[&key(side, node)].fusion.y
    }
}

fn objective(
    p: &ModelParams,
    tables: &[InstanceTables],
    batch: &[Example],
    cfg: LossConfig,
    grads: Option<&mut ModelParams>,
) -> BatchLoss {
    let pass = Pass::run(p, tables, batch);
    let mut kink = pass.nodes.values().fold(f64::INFINITY, |m, f| m.min(f.kink_distance()));
    let mut g_y: BTreeMap<(u8, NodeId), Array1<f64>> = BTreeMap::new();
    let want_grad = grads.is_some();
    let mut margin_total = 0.0;
    let b = batch.len().max(1) as f64;

    for ex in batch {
        if ex.negatives.is_empty() {
            continue;
        }
        let yu = pass.y(Side::Source, ex.user);
        let yp = pass.y(Side::Sink, ex.positive);
        let z_pos = sigmoid(yu.dot(yp));
        let w = 1.0 / (ex.negatives.len() as f64 * b);
        let mut d_pos = 0.0;
        for &j in &ex.negatives {
            let yj = pass.y(Side::Sink, j);
            let z_neg = sigmoid(yu.dot(yj));
            let m = z_neg - z_pos + cfg.margin;
            kink = kink.min(m.abs());
            if m > 0.0 {
                margin_total += m * w;
                if want_grad {
                    let dz = w * z_neg * (1.0 - z_neg);
                    add(&mut g_y, key(Side::Source, ex.user), yj, dz);
                    add(&mut g_y, key(Side::Sink, j), yu, dz);
                    d_pos -= w;
                }
            }
        }
        if want_grad && d_pos != 0.0 {
            let dz = d_pos * z_pos * (1.0 - z_pos);
            add(&mut g_y, key(Side::Source, ex.user), yp, dz);
            add(&mut g_y, key(Side::Sink, ex.positive), yu, dz);
        }
    }

    let l2 = cfg.l2 * cfg.l2_scale;
    let total = margin_total + 0.5 * l2 * p.sum_squares();
    if let Some(g) = grads {
        for (k, gy) in &g_y {
            node_backward(p, tables, side_of(k.0), k.1, &pass.nodes[k], gy, g);
        }
        if l2 != 0.0 {
            g.add_scaled(p, l2);
        }
    }
    BatchLoss {
        total,
        margin: margin_total,
        kink_distance: kink,
    }
}

fn add(acc: &mut BTreeMap<(u8, NodeId), Array1<f64>>, k: (u8, NodeId), v: &Array1<f64>, scale: f64) {
    acc.entry(k).or_insert_with(|| Array1::zeros(v.len())).scaled_add(scale, v);
}

/// Mean margin loss over the batch plus the scaled L2 penalty.
pub fn batch_loss(p: &ModelParams, tables: &[InstanceTables], batch: &[Example], cfg: LossConfig) -> BatchLoss {
    objective(p, tables, batch, cfg, None)
}

/// [`batch_loss`] and its gradient with respect to every parameter.
pub fn batch_loss_grad(
    p: &ModelParams,
    tables: &[InstanceTables],
    batch: &[Example],
    cfg: LossConfig,
) -> (BatchLoss, ModelParams) {
    let mut g = p.zeros_like();
    let loss = objective(p, tables, batch, cfg, Some(&mut g));
    (loss, g)
}
