use serde::{Deserialize, Serialize};

use super::{Module, Scalar, Tensor};

/// `lr0 · gamma^⌊epoch / step_size⌋`.
pub fn step_scheduler(lr0: f64, gamma: f64, step_size: usize, epoch: usize) -> f64 {
    lr0 * gamma.powi((epoch / step_size.max(1)) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub trait Optimizer<T: Scalar> {
    /// Applies one update to every trainable tensor of `model` from its
    /// accumulated gradient.
    fn step(&mut self, model: &mut dyn Module<T>, lr: f64);
}

fn slots<T: Scalar>(buffers: &mut Vec<Vec<T>>, index: usize, t: &Tensor<T>) {
    if buffers.len() <= index {
        buffers.push(vec![T::zero(); t.numel()]);
    }
}

/// Momentum SGD in the `v ← μv + g; w ← w − lr·v` form.
pub struct Sgd<T: Scalar> {
    pub momentum: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(momentum: f64) -> Self {
        Sgd {
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn update(w: &mut [T], g: &[T], v: &mut [T], lr: f64, momentum: f64) {
        let (lr, mu) = (T::of(lr), T::of(momentum));
        for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = mu * *v + g;
            *w -= lr * *v;
        }
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn step(&mut self, model: &mut dyn Module<T>, lr: f64) {
        let mut i = 0;
        let mu = self.momentum;
        let velocity = &mut self.velocity;
        model.visit_params("", &mut |_, t| {
            slots(velocity, i, t);
            if let Some(g) = &t.grad {
                Sgd::update(&mut t.data, g, &mut velocity[i], lr, mu);
            }
            i += 1;
        });
    }
}

/// Bias-corrected Adam.
pub struct Adam<T: Scalar> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl<T: Scalar> Default for Adam<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, model: &mut dyn Module<T>, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut i = 0;
        model.visit_params("", &mut |_, t| {
            slots(ms, i, t);
            slots(vs, i, t);
            if let Some(g) = &t.grad {
                for (((w, &g), m), v) in t.data.iter_mut().zip(g).zip(ms[i].iter_mut()).zip(vs[i].iter_mut()) {
                    let g = g.f64();
                    let mn = b1 * m.f64() + (1.0 - b1) * g;
                    let vn = b2 * v.f64() + (1.0 - b2) * g * g;
                    *m = T::of(mn);
                    *v = T::of(vn);
                    let step = lr * (mn / c1) / ((vn / c2).sqrt() + eps);
                    *w = T::of(w.f64() - step);
                }
            }
            i += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Mode, Module};
    use super::*;
    use crate::error::Result;

    struct Scalar1 {
        w: Tensor<f64>,
    }

    impl Module<f64> for Scalar1 {
        fn forward(&mut self, x: &Tensor<f64>, _: Mode) -> Result<Tensor<f64>> {
            Ok(x.clone())
        }
        fn backward(&mut self, g: &Tensor<f64>) -> Result<Tensor<f64>> {
            Ok(g.clone())
        }
        fn visit_params(&mut self, _: &str, f: &mut dyn FnMut(&str, &mut Tensor<f64>)) {
            f("w", &mut self.w);
        }
    }

    fn with_grad(w: f64, g: f64) -> Scalar1 {
        let mut t = Tensor::param(&[1], vec![w]);
        t.grad = Some(vec![g]);
        Scalar1 { w: t }
    }

    #[test]
    fn plain_sgd_step() {
        let mut m = with_grad(1.0, 2.0);
        Sgd::new(0.0).step(&mut m, 0.1);
        assert!((m.w.data[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn momentum_unroll() {
        let mut m = with_grad(0.0, 1.0);
        let mut opt = Sgd::new(0.9);
        opt.step(&mut m, 1.0);
        opt.step(&mut m, 1.0);
        assert!((m.w.data[0] + 2.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_converges_geometrically() {
        let mut m = with_grad(0.0, 1.0);
        let mut opt = Sgd::new(0.5);
        opt.step(&mut m, 1.0);
        m.w.grad = Some(vec![0.0]);
        let mut steps = Vec::new();
        for _ in 0..60 {
            let before = m.w.data[0];
            opt.step(&mut m, 1.0);
            steps.push(m.w.data[0] - before);
        }
        // each step is half the previous; the fixed point is -1 - 0.5 - 0.25 - ... = -2
        for w in steps.windows(2) {
            assert!((w[1] - 0.5 * w[0]).abs() < 1e-15);
        }
        assert!((m.w.data[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_is_lr() {
        for g in [1e-3, 0.5, -7.0] {
            let mut m = with_grad(0.0, g);
            Adam::new().step(&mut m, 0.01);
            assert!((m.w.data[0].abs() - 0.01).abs() < 1e-6, "{g}");
            assert_eq!(m.w.data[0].signum(), -g.signum());
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut m = with_grad(3.0, 0.0);
        let mut opt = Adam::new();
        for _ in 0..5 {
            opt.step(&mut m, 0.1);
        }
        assert_eq!(m.w.data[0], 3.0);
    }

    #[test]
    fn adam_matches_scalar_trace() {
        let grads = [0.5, -0.25, 1.0];
        let mut m = with_grad(1.0, 0.0);
        let mut opt = Adam::new();
        let (mut w, mut mm, mut vv) = (1.0f64, 0.0f64, 0.0f64);
        for (t, &g) in grads.iter().enumerate() {
            m.w.grad = Some(vec![g]);
            opt.step(&mut m, 0.01);
            mm = 0.9 * mm + 0.1 * g;
            vv = 0.999 * vv + 0.001 * g * g;
            let mh = mm / (1.0 - 0.9f64.powi(t as i32 + 1));
            let vh = vv / (1.0 - 0.999f64.powi(t as i32 + 1));
            w -= 0.01 * mh / (vh.sqrt() + 1e-8);
            assert!((m.w.data[0] - w).abs() < 1e-12);
        }
    }

    #[test]
    fn scheduler_values() {
        for e in 0..10 {
            assert_eq!(step_scheduler(0.001, 0.1, 10, e), 0.001);
        }
        assert!((step_scheduler(0.0143673, 0.1, 7, 14) - 1.43673e-4).abs() < 1e-12);
        assert_eq!(step_scheduler(0.05, 1.0, 3, 99), 0.05);
    }
}
