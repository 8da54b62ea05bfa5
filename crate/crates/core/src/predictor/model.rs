use ndarray::{s, Array1, Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::gene::Gene;
use crate::optim::{Adam, Parameters};
use crate::seed;

pub const STATE_DIM: usize = 16;
pub const HIDDEN_DIM: usize = 32;
pub const ROUNDS: usize = 2;

/// Small GCN over gene graphs: type embeddings, two message rounds, mean
/// pooling, and a tanh readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub type_emb: Array2<f64>,
    pub msg_w: Vec<Array2<f64>>,
    pub msg_b: Vec<Array1<f64>>,
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    pub out_w: Array1<f64>,
    pub out_b: Array1<f64>,
}

impl Parameters for PredictorParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.type_emb.as_slice().expect("standard layout")];
        for (w, b) in self.msg_w.iter().zip(&self.msg_b) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out.push(self.hidden_w.as_slice().expect("standard layout"));
        out.push(self.hidden_b.as_slice().expect("standard layout"));
        out.push(self.out_w.as_slice().expect("standard layout"));
        out.push(self.out_b.as_slice().expect("standard layout"));
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.type_emb.as_slice_mut().expect("standard layout")];
        for (w, b) in self.msg_w.iter_mut().zip(self.msg_b.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.hidden_w.as_slice_mut().expect("standard layout"));
        out.push(self.hidden_b.as_slice_mut().expect("standard layout"));
        out.push(self.out_w.as_slice_mut().expect("standard layout"));
        out.push(self.out_b.as_slice_mut().expect("standard layout"));
        out
    }
}

pub fn init_predictor(type_count: usize, seed: u64) -> PredictorParams {
    let mut rng = seed::rng_from(seed, &["predictor".into()]);
    let mut mat = |r: usize, c: usize, bound: f64| {
        let u = Uniform::new_inclusive(-bound, bound);
        Array2::from_shape_simple_fn((r, c), || u.sample(&mut rng))
    };
    let glorot = |r: usize, c: usize| (6.0 / (r + c) as f64).sqrt();
    let type_emb = mat(type_count, STATE_DIM, 0.5);
    let msg_w = (0..ROUNDS)
        .map(|_| mat(STATE_DIM, 2 * STATE_DIM, glorot(STATE_DIM, 2 * STATE_DIM)))
        .collect();
    let hidden_w = mat(HIDDEN_DIM, STATE_DIM, glorot(HIDDEN_DIM, STATE_DIM));
    let out_w = mat(1, HIDDEN_DIM, glorot(1, HIDDEN_DIM)).remove_axis(Axis(0));
    PredictorParams {
        type_emb,
        msg_w,
        msg_b: vec![Array1::zeros(STATE_DIM); ROUNDS],
        hidden_w,
        hidden_b: Array1::zeros(HIDDEN_DIM),
        out_w,
        out_b: Array1::zeros(1),
    }
}

struct Round {
    input: Array2<f64>,
    pre: Array2<f64>,
}

struct GeneForward {
    neighbors: Vec<Vec<usize>>,
    rounds: Vec<Round>,
    pooled: Array1<f64>,
}

fn gene_forward(p: &PredictorParams, gene: &Gene) -> GeneForward {
    let n = gene.len();
    let d = STATE_DIM;
    let neighbors: Vec<Vec<usize>> = (0..n).map(|v| gene.neighbors(v)).collect();
    let mut state = p.type_emb.select(Axis(0), gene.types());
    let mut rounds = Vec::with_capacity(ROUNDS);
    for r in 0..ROUNDS {
        let mut input = Array2::zeros((n, 2 * d));
        input.slice_mut(s![.., ..d]).assign(&state);
        for (v, nb) in neighbors.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let mut row = input.slice_mut(s![v, d..]);
            for &u in nb {
                row += &state.row(u);
            }
            row /= nb.len() as f64;
        }
        let pre = input.dot(&p.msg_w[r].t()) + &p.msg_b[r];
        state = pre.mapv(|x| x.max(0.0));
        rounds.push(Round { input, pre });
    }
    let pooled = state.mean_axis(Axis(0)).expect("gene has nodes");
    GeneForward {
        neighbors,
        rounds,
        pooled,
    }
}

struct Forward {
    genes: Vec<GeneForward>,
    pooled: Array1<f64>,
    hidden: Array1<f64>,
    out: f64,
}

fn forward(p: &PredictorParams, genes: &[Gene]) -> Forward {
    let per: Vec<GeneForward> = genes.iter().map(|g| gene_forward(p, g)).collect();
    let mut pooled = Array1::zeros(STATE_DIM);
    for g in &per {
        pooled += &g.pooled;
    }
    pooled /= per.len().max(1) as f64;
    let hidden = (p.hidden_w.dot(&pooled) + &p.hidden_b).mapv(f64::tanh);
    let out = (p.out_w.dot(&hidden) + p.out_b[0]).tanh();
    Forward {
        genes: per,
        pooled,
        hidden,
        out,
    }
}

/// Predicted normalized fitness of an individual, in (-1, 1).
pub fn predict(p: &PredictorParams, genes: &[Gene]) -> f64 {
    forward(p, genes).out
}

fn backward(p: &PredictorParams, genes: &[Gene], f: &Forward, g_out: f64, g: &mut PredictorParams) {
    let d = STATE_DIM;
    let g_u = g_out * (1.0 - f.out * f.out);
    g.out_w.scaled_add(g_u, &f.hidden);
    g.out_b[0] += g_u;
    let g_a = &p.out_w * g_u * &f.hidden.mapv(|h| 1.0 - h * h);
    g.hidden_w += &g_a.view().insert_axis(Axis(1)).dot(&f.pooled.view().insert_axis(Axis(0)));
    g.hidden_b += &g_a;
    let g_pooled = p.hidden_w.t().dot(&g_a) / genes.len() as f64;

    for (gene, gf) in genes.iter().zip(&f.genes) {
        let n = gene.len();
        let mut g_state = Array2::zeros((n, d));
        for mut row in g_state.rows_mut() {
            row.assign(&(&g_pooled / n as f64));
        }
        for r in (0..ROUNDS).rev() {
            let round = &gf.rounds[r];
            let g_pre = ndarray::Zip::from(&g_state)
                .and(&round.pre)
                .map_collect(|&gs, &pre| if pre > 0.0 { gs } else { 0.0 });
            g.msg_w[r] += &g_pre.t().dot(&round.input);
            g.msg_b[r] += &g_pre.sum_axis(Axis(0));
            let g_in = g_pre.dot(&p.msg_w[r]);
            let mut prev = g_in.slice(s![.., ..d]).to_owned();
            for (v, nb) in gf.neighbors.iter().enumerate() {
                if nb.is_empty() {
                    continue;
                }
                let share = g_in.slice(s![v, d..]).to_owned() / nb.len() as f64;
                for &u in nb {
                    let mut row = prev.row_mut(u);
                    row += &share;
                }
            }
            g_state = prev;
        }
        for (v, &t) in gene.types().iter().enumerate() {
            let mut row = g.type_emb.row_mut(t);
            row += &g_state.row(v);
        }
    }
}

/// Every ReLU input the forward passes over `data` produce.
pub(crate) fn pre_activations(p: &PredictorParams, data: &[(Vec<Gene>, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (genes, _) in data {
        for g in &forward(p, genes).genes {
            for r in &g.rounds {
                out.extend(r.pre.iter().copied());
            }
        }
    }
    out
}

/// Mean squared error over `(individual, target)` pairs.
pub fn mse(p: &PredictorParams, data: &[(Vec<Gene>, f64)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|(g, t)| (predict(p, g) - t).powi(2)).sum::<f64>() / data.len() as f64
}

pub fn mse_grad(p: &PredictorParams, data: &[(Vec<Gene>, f64)]) -> (f64, PredictorParams) {
    let mut g = p.zeros_like();
    let mut loss = 0.0;
    let n = data.len().max(1) as f64;
    for (genes, t) in data {
        let f = forward(p, genes);
        let err = f.out - t;
        loss += err * err / n;
        backward(p, genes, &f, 2.0 * err / n, &mut g);
    }
    (loss, g)
}

/// Full-batch ADAM on [`mse`]. The result depends only on the inputs.
pub fn fit(params: PredictorParams, data: &[(Vec<Gene>, f64)], epochs: usize, lr: f64) -> PredictorParams {
    let mut p = params;
    if data.is_empty() {
        return p;
    }
    let mut adam = Adam::new(&p);
    for _ in 0..epochs {
        let (_, g) = mse_grad(&p, data);
        adam.step(&mut p, &g, lr);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gene::parse;
    use crate::hin::synth::SyntheticSpec;
    use crate::hin::Schema;

    fn schema() -> Schema {
        SyntheticSpec::yelp_like().schema().unwrap()
    }

    #[test]
    fn zero_params_predict_zero() {
        let s = schema();
        let mut p = init_predictor(s.type_count(), 1);
        for sl in p.slices_mut() {
            sl.fill(0.0);
        }
        assert_eq!(predict(&p, &[Gene::direct(&s)]), 0.0);
    }

    #[test]
    fn gene_order_and_relabeling_invariant() {
        let s = schema();
        let p = init_predictor(s.type_count(), 4);
        let a = parse("[U,B,U,B](0-1)(0-3)(1-2)(2-3)", &s).unwrap();
        let b = parse("[U,B,B,A](0-2)(1-3)(2-3)", &s).unwrap();
        let b2 = parse("[U,B,A,B](0-3)(1-2)(2-3)", &s).unwrap();
        let x = predict(&p, &[a.clone(), b.clone()]);
        assert!((x - predict(&p, &[b, a.clone()])).abs() < 1e-15);
        assert!((x - predict(&p, &[a, b2])).abs() < 1e-15);
        assert!(x.abs() < 1.0);
    }

    #[test]
    fn single_record_fits() {
        let s = schema();
        let data = vec![(vec![Gene::direct(&s)], 0.7)];
        let p = fit(init_predictor(s.type_count(), 2), &data, 200, 0.01);
        assert!(mse(&p, &data) < 1e-3);
    }

    #[test]
    fn zero_epochs_unchanged() {
        let s = schema();
        let p = init_predictor(s.type_count(), 2);
        assert_eq!(fit(p.clone(), &[(vec![Gene::direct(&s)], 0.3)], 0, 0.01), p);
    }

    #[test]
    fn identical_inputs_bounded_by_target_variance() {
        let s = schema();
        let g = vec![Gene::direct(&s)];
        let data = vec![(g.clone(), 0.2), (g, -0.4)];
        let p = fit(init_predictor(s.type_count(), 2), &data, 300, 0.01);
        assert!(mse(&p, &data) >= 0.09 - 1e-12);
    }
}
