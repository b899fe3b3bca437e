use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::{Mode, Module, Tensor};
use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Check at most this many elements per tensor, chosen at random;
    /// `None` checks every element.
    pub max_per_tensor: Option<usize>,
    pub check_input: bool,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            max_per_tensor: None,
            check_input: true,
            mode: Mode::Train,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst element.
    pub worst: (String, usize),
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn projected(module: &mut dyn Module<f64>, x: &Tensor<f64>, r: &[f64], mode: Mode) -> Result<f64> {
    let y = module.forward(x, mode)?;
    Ok(y.data.iter().zip(r).map(|(a, b)| a * b).sum())
}

fn indices(numel: usize, cap: Option<usize>, rng: &mut impl rand::Rng) -> Vec<usize> {
    match cap {
        Some(k) if k < numel => {
            let mut v = index::sample(rng, numel, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..numel).collect(),
    }
}

/// Compares the analytic backward pass of `module` with central finite
/// differences of the scalar `L = Σ r ⊙ module(x)` for a fixed random `r`.
/// Returns the largest relative error over all checked elements.
pub fn grad_check(module: &mut dyn Module<f64>, input: &Tensor<f64>, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = seed::rng(opts.seed);
    let y = module.forward(input, opts.mode)?;
    let r: Vec<f64> = (0..y.numel()).map(|_| StandardNormal.sample(&mut rng)).collect();
    module.zero_grad();
    let gx = module.backward(&Tensor::new(&y.shape, r.clone())?)?;
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    module.visit_params("", &mut |name, t| {
        analytic.push((name.to_string(), t.grad.clone().unwrap_or_else(|| vec![0.0; t.numel()])));
    });

    let h = opts.eps;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
    };
    let mut record = |name: &str, i: usize, a: f64, n: f64| {
        let e = relative_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error || report.checked == 1 {
            report.max_rel_error = e;
            report.worst = (name.to_string(), i);
        }
    };

    if opts.check_input {
        let mut x = input.clone();
        for i in indices(x.numel(), opts.max_per_tensor, &mut rng) {
            let orig = x.data[i];
            x.data[i] = orig + h;
            let lp = projected(module, &x, &r, opts.mode)?;
            x.data[i] = orig - h;
            let lm = projected(module, &x, &r, opts.mode)?;
            x.data[i] = orig;
            record("input", i, gx.data[i], (lp - lm) / (2.0 * h));
        }
    }

    for (k, (name, grad)) in analytic.iter().enumerate() {
        for i in indices(grad.len(), opts.max_per_tensor, &mut rng) {
            let set = |value: Option<f64>, module: &mut dyn Module<f64>| {
                let (mut j, mut old) = (0, 0.0);
                module.visit_params("", &mut |_, t| {
                    if j == k {
                        old = t.data[i];
                        if let Some(v) = value {
                            t.data[i] = v;
                        }
                    }
                    j += 1;
                });
                old
            };
            let orig = set(None, module);
            set(Some(orig + h), module);
            let lp = projected(module, input, &r, opts.mode)?;
            set(Some(orig - h), module);
            let lm = projected(module, input, &r, opts.mode)?;
            set(Some(orig), module);
            record(name, i, grad[i], (lp - lm) / (2.0 * h));
        }
    }
    Ok(report)
}
