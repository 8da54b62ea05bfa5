use ndarray::{s, Array1, Array2, ArrayView1};

use super::params::ModelParams;
use crate::adjsearch::{InstanceTables, NeighborTable};
use crate::hin::{NodeId, Side};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Recommendation likelihood of a pair.
pub fn score(y_u: ArrayView1<f64>, y_i: ArrayView1<f64>) -> f64 {
    sigmoid(y_u.dot(&y_i))
}

/// Mean over negatives of `max(0, z_neg - z_pos + margin)`.
pub fn margin_loss(z_pos: f64, z_negs: &[f64], margin: f64) -> f64 {
    if z_negs.is_empty() {
        return 0.0;
    }
    z_negs.iter().map(|z| (z - z_pos + margin).max(0.0)).sum::<f64>() / z_negs.len() as f64
}

#[derive(Debug, Clone)]
pub(crate) struct ViewForward {
    /// `[x_node ; mean of neighbor features]`
    pub input: Array1<f64>,
    pub pre: Array1<f64>,
    pub h: Array1<f64>,
}

pub(crate) fn view_forward(p: &ModelParams, view: usize, side: Side, node: NodeId, table: &NeighborTable) -> ViewForward {
    let d = p.dim;
    let mut input = Array1::zeros(2 * d);
    input.slice_mut(s![..d]).assign(&p.features(side).row(node as usize));
    let nbrs = table.get(node);
    if !nbrs.is_empty() {
        let other = p.features(side.other());
        let mut mean = input.slice_mut(s![d..]);
        for &j in nbrs {
            mean += &other.row(j as usize);
        }
        mean /= nbrs.len() as f64;
    }
    let pre = p.view_w[view].dot(&input) + &p.view_b[view];
    let h = pre.mapv(|v| v.max(0.0));
    ViewForward { input, pre, h }
}

/// Single-layer GCN embedding of `node` under one view.
pub fn view_embed(p: &ModelParams, view: usize, side: Side, node: NodeId, table: &NeighborTable) -> Array1<f64> {
    view_forward(p, view, side, node, table).h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub q: Array1<f64>,
    pub alpha: Array1<f64>,
    pub y: Array1<f64>,
}

fn concat(hs: &[Array1<f64>]) -> Array1<f64> {
    let views: Vec<ArrayView1<f64>> = hs.iter().map(|h| h.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).expect("views share a dimension")
}

/// Attention fusion of per-view embeddings with transform `w` (d × n·d).
pub fn fuse_with(w: &Array2<f64>, hs: &[Array1<f64>]) -> Fusion {
    let q = w.dot(&concat(hs)).mapv(f64::tanh);
    let logits: Vec<f64> = hs.iter().map(|h| h.dot(&q)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let alpha = Array1::from_iter(exps.iter().map(|e| e / total));
    let mut y = Array1::zeros(q.len());
    for (a, h) in alpha.iter().zip(hs) {
        y.scaled_add(*a, h);
    }
    Fusion { q, alpha, y }
}

pub fn fuse(p: &ModelParams, side: Side, hs: &[Array1<f64>]) -> Fusion {
    fuse_with(p.attn(side), hs)
}

#[derive(Debug, Clone)]
pub(crate) struct NodeForward {
    pub views: Vec<ViewForward>,
    pub hcat: Array1<f64>,
    pub fusion: Fusion,
}

impl NodeForward {
    /// Distance of the nearest ReLU pre-activation to zero.
    pub fn kink_distance(&self) -> f64 {
        self.views
            .iter()
            .flat_map(|v| v.pre.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

pub(crate) fn node_forward(p: &ModelParams, tables: &[InstanceTables], side: Side, node: NodeId) -> NodeForward {
    let views: Vec<ViewForward> = tables
        .iter()
        .enumerate()
        .map(|(m, t)| view_forward(p, m, side, node, t.side(side)))
        .collect();
    let hs: Vec<Array1<f64>> = views.iter().map(|v| v.h.clone()).collect();
    let fusion = fuse(p, side, &hs);
    NodeForward {
        hcat: concat(&hs),
        views,
        fusion,
    }
}

/// Fused embedding of one endpoint node.
pub fn embed_node(p: &ModelParams, tables: &[InstanceTables], side: Side, node: NodeId) -> Array1<f64> {
    node_forward(p, tables, side, node).fusion.y
}

/// Accumulates into `g` the gradient of a scalar whose gradient with respect
/// to this node's fused embedding is `g_y`.
pub(crate) fn node_backward(
    p: &ModelParams,
    tables: &[InstanceTables],
    side: Side,
    node: NodeId,
    fwd: &NodeForward,
    g_y: &Array1<f64>,
    g: &mut ModelParams,
) {
    let d = p.dim;
    let n = fwd.views.len();
    let Fusion { q, alpha, .. } = &fwd.fusion;

    // y = sum_m alpha_m h_m, alpha = softmax(h_m . q)
    let mut g_h: Vec<Array1<f64>> = alpha.iter().map(|&a| g_y * a).collect();
    let g_alpha: Vec<f64> = fwd.views.iter().map(|v| g_y.dot(&v.h)).collect();
    let mean_g: f64 = alpha.iter().zip(&g_alpha).map(|(a, ga)| a * ga).sum();
    let mut g_q = Array1::zeros(d);
    for m in 0..n {
        let g_e = alpha[m] * (g_alpha[m] - mean_g);
        g_h[m].scaled_add(g_e, q);
        g_q.scaled_add(g_e, &fwd.views[m].h);
    }

    // q = tanh(W hcat)
    let g_pre_q = &g_q * &q.mapv(|v| 1.0 - v * v);
    let w = p.attn(side);
    let g_hcat = w.t().dot(&g_pre_q);
    {
        let gw = g.attn_mut(side);
        let outer = g_pre_q.view().insert_axis(ndarray::Axis(1)).dot(&fwd.hcat.view().insert_axis(ndarray::Axis(0)));
        *gw += &outer;
    }

    let own = p.slot(side);
    let other = p.slot(side.other());
    for m in 0..n {
        let v = &fwd.views[m];
        let g_hm = &g_h[m] + &g_hcat.slice(s![m * d..(m + 1) * d]);
        let g_pre = ndarray::Zip::from(&g_hm).and(&v.pre).map_collect(|&gh, &pre| if pre > 0.0 { gh } else { 0.0 });
        g.view_w[m] += &g_pre
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&v.input.view().insert_axis(ndarray::Axis(0)));
        g.view_b[m] += &g_pre;
        let g_in = p.view_w[m].t().dot(&g_pre);
        {
            let mut row = g.features[own].row_mut(node as usize);
            row += &g_in.slice(s![..d]);
        }
        let nbrs = tables[m].side(side).get(node);
        if !nbrs.is_empty() {
            let share = g_in.slice(s![d..]).mapv(|v| v / nbrs.len() as f64);
            for &j in nbrs {
                let mut row = g.features[other].row_mut(j as usize);
                row += &share;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gene::GeneKey;
    use crate::mvgcn::params::{init_params, EndpointSizes};
    use ndarray::array;

    fn table(side: Side, lists: Vec<Vec<NodeId>>) -> NeighborTable {
        NeighborTable::new(GeneKey::from_raw("t"), side, None, lists)
    }

    fn small(d: usize, n: usize) -> ModelParams {
        init_params(
            EndpointSizes {
                source: 3,
                sink: 4,
                shared: false,
            },
            d,
            (0..n).map(|i| GeneKey::from_raw(format!("g{i}"))).collect(),
            11,
        )
    }

    #[test]
    fn score_values() {
        let z = array![0.0, 0.0];
        assert_eq!(score(z.view(), array![1.0, 2.0].view()), 0.5);
        assert_eq!(score(array![1.0, 0.0].view(), array![0.0, 3.0].view()), 0.5);
        let one = Array1::from_elem(4, 1.0);
        assert!((score(one.view(), one.view()) - 0.9820137900379085).abs() < 1e-15);
        let (a, b) = (array![0.3, -1.2], array![2.0, 0.7]);
        assert_eq!(score(a.view(), b.view()), score(b.view(), a.view()));
    }

    #[test]
    fn margin_cases() {
        assert_eq!(margin_loss(0.9, &[0.3], 0.4), 0.0);
        assert!((margin_loss(0.5, &[0.8], 0.2) - 0.5).abs() < 1e-15);
        assert!((margin_loss(0.5, &[0.8, 0.1], 0.2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_neighbors_zero_weights() {
        let mut p = small(3, 1);
        p.view_w[0].fill(0.0);
        let t = table(Side::Source, vec![vec![]; 3]);
        assert_eq!(view_embed(&p, 0, Side::Source, 1, &t), Array1::<f64>::zeros(3));
    }

    #[test]
    fn identity_slice_gives_relu_of_features() {
        let mut p = small(3, 1);
        p.view_w[0].fill(0.0);
        for i in 0..3 {
            p.view_w[0][[i, i]] = 1.0;
        }
        p.features[0].row_mut(2).assign(&array![0.5, -0.25, 0.0]);
        let t = table(Side::Source, vec![vec![], vec![], vec![0, 1]]);
        assert_eq!(view_embed(&p, 0, Side::Source, 2, &t), array![0.5, 0.0, 0.0]);
    }

    #[test]
    fn hand_formula_with_two_neighbors() {
        let mut p = small(3, 1);
        p.view_b[0] = array![0.1, -0.2, 0.05];
        let t = table(Side::Source, vec![vec![], vec![1, 3], vec![]]);
        let h = view_embed(&p, 0, Side::Source, 1, &t);
        let x = p.features[0].row(1).to_vec();
        let n1 = p.features[1].row(1).to_vec();
        let n3 = p.features[1].row(3).to_vec();
        for r in 0..3 {
            let mut acc = p.view_b[0][r];
            for c in 0..3 {
                acc += p.view_w[0][[r, c]] * x[c];
                acc += p.view_w[0][[r, 3 + c]] * (n1[c] + n3[c]) / 2.0;
            }
            assert!((h[r] - acc.max(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_view_is_identity() {
        let p = small(4, 1);
        let h = array![0.3, 0.0, 1.2, 0.7];
        let f = fuse(&p, Side::Source, std::slice::from_ref(&h));
        assert_eq!(f.alpha, array![1.0]);
        assert_eq!(f.y, h);
    }

    #[test]
    fn identical_views_split_evenly() {
        let p = small(4, 2);
        let h = array![0.3, 0.1, 1.2, 0.7];
        let f = fuse(&p, Side::Sink, &[h.clone(), h.clone()]);
        assert_eq!(f.alpha, array![0.5, 0.5]);
        assert!((&f.y - &h).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn two_by_two_reference() {
        // q = tanh(W [h1; h2]), alpha = softmax(h . q), worked by hand
        let w = array![[0.5, -0.3, 0.2, 0.1], [0.0, 0.4, -0.6, 0.3]];
        let h1 = array![1.0, 0.5];
        let h2 = array![0.2, 0.8];
        let f = fuse_with(&w, &[h1.clone(), h2.clone()]);
        let q0 = (0.5 * 1.0 - 0.3 * 0.5 + 0.2 * 0.2 + 0.1 * 0.8f64).tanh();
        let q1 = (0.0 + 0.4 * 0.5 - 0.6 * 0.2 + 0.3 * 0.8f64).tanh();
        let e1 = 1.0 * q0 + 0.5 * q1;
        let e2 = 0.2 * q0 + 0.8 * q1;
        let a1 = e1.exp() / (e1.exp() + e2.exp());
        assert!((f.alpha[0] - a1).abs() < 1e-15);
        assert!((f.alpha.sum() - 1.0).abs() < 1e-12);
        let y = &h1 * a1 + &h2 * (1.0 - a1);
        assert!((&f.y - &y).iter().all(|v| v.abs() < 1e-15));
    }
}
