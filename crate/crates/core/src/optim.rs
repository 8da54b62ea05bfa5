//! Parameter containers and the ADAM optimizer shared by the ranking model
//! and the surrogate predictor.

/// A set of dense tensors that can be viewed as flat slices in a fixed order.
pub trait Parameters: Clone {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    /// Same shapes, all zeros.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for s in z.slices_mut() {
            s.fill(0.0);
        }
        z
    }

    fn sum_squares(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|v| v * v).sum()
    }

    fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Parameters>(params: &P) -> Self {
        let shapes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Vec2(Vec<f64>);

    impl Parameters for Vec2 {
        fn slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn minimizes_quadratic() {
        // f = (x-3)^2 + (y+1)^2
        let mut p = Vec2(vec![0.0, 0.0]);
        let mut opt = Adam::new(&p);
        for _ in 0..2000 {
            let g = Vec2(vec![2.0 * (p.0[0] - 3.0), 2.0 * (p.0[1] + 1.0)]);
            opt.step(&mut p, &g, 0.05);
        }
        assert!((p.0[0] - 3.0).abs() < 1e-3 && (p.0[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Vec2(vec![1.0]);
        let mut opt = Adam::new(&p);
        opt.step(&mut p, &Vec2(vec![123.0]), 0.1);
        assert!((p.0[0] - 0.9).abs() < 1e-9);
    }
}
