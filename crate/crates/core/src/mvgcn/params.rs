use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::gene::GeneKey;
use crate::hin::{Hin, Side};
use crate::optim::Parameters;
use crate::seed;

/// Node counts of the two endpoint types of the target relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointSizes {
    pub source: usize,
    pub sink: usize,
    /// Source and sink are the same node type and share one feature table.
    pub shared: bool,
}

impl EndpointSizes {
    pub fn of(hin: &Hin) -> Self {
        let t = hin.schema().target();
        EndpointSizes {
            source: hin.node_count(t.source),
            sink: hin.node_count(t.sink),
            shared: t.source == t.sink,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub gene_keys: Vec<GeneKey>,
    /// Base features per endpoint type, one row per node.
    pub features: Vec<Array2<f64>>,
    /// Per-view GCN weight, d × 2d.
    pub view_w: Vec<Array2<f64>>,
    pub view_b: Vec<Array1<f64>>,
    /// Attention transform for the source side and the sink side, d × n·d.
    pub attn_w: Vec<Array2<f64>>,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Source => 0,
        Side::Sink => 1,
    }
}

impl ModelParams {
    pub fn n_views(&self) -> usize {
        self.view_w.len()
    }

    pub fn slot(&self, side: Side) -> usize {
        side_index(side).min(self.features.len() - 1)
    }

    pub fn features(&self, side: Side) -> &Array2<f64> {
        &self.features[self.slot(side)]
    }

    pub fn attn(&self, side: Side) -> &Array2<f64> {
        &self.attn_w[side_index(side)]
    }

    pub(crate) fn attn_mut(&mut self, side: Side) -> &mut Array2<f64> {
        &mut self.attn_w[side_index(side)]
    }

    pub fn sizes(&self) -> EndpointSizes {
        EndpointSizes {
            source: self.features[0].nrows(),
            sink: self.features[self.features.len() - 1].nrows(),
            shared: self.features.len() == 1,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }
}

impl Parameters for ModelParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(self.features.iter().map(|a| a.as_slice().expect("standard layout")));
        for (w, b) in self.view_w.iter().zip(&self.view_b) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out.extend(self.attn_w.iter().map(|a| a.as_slice().expect("standard layout")));
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.features.iter_mut().map(|a| a.as_slice_mut().expect("standard layout")));
        for (w, b) in self.view_w.iter_mut().zip(self.view_b.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out.extend(self.attn_w.iter_mut().map(|a| a.as_slice_mut().expect("standard layout")));
        out
    }
}

fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut seed::Rng) -> Array2<f64> {
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn glorot(rows: usize, cols: usize, rng: &mut seed::Rng) -> Array2<f64> {
    uniform_matrix(rows, cols, (6.0 / (rows + cols) as f64).sqrt(), rng)
}

/// Glorot-uniform matrices, zero biases, features uniform in ±0.05.
///
/// Each view is drawn from a stream keyed by its gene key, so repeated genes
/// start from identical weights.
pub fn init_params(sizes: EndpointSizes, dim: usize, gene_keys: Vec<GeneKey>, seed: u64) -> ModelParams {
    assert!(dim >= 1 && !gene_keys.is_empty(), "need d >= 1 and at least one view");
    let n = gene_keys.len();
    let mut rng = seed::rng_from(seed, &["features".into()]);
    let mut features = vec![uniform_matrix(sizes.source, dim, 0.05, &mut rng)];
    if !sizes.shared {
        features.push(uniform_matrix(sizes.sink, dim, 0.05, &mut rng));
    }
    let view_w = gene_keys
        .iter()
        .map(|k| glorot(dim, 2 * dim, &mut seed::rng_from(seed, &["view".into(), k.as_str().into()])))
        .collect();
    let mut rng = seed::rng_from(seed, &["attention".into()]);
    let attn_w = (0..2).map(|_| glorot(dim, n * dim, &mut rng)).collect();
    ModelParams {
        dim,
        view_b: vec![Array1::zeros(dim); n],
        gene_keys,
        features,
        view_w,
        attn_w,
    }
}
