//! Minimal deterministic CNN kernels: tensors, layers with hand-written
//! backward passes, a small residual network, losses and optimizers.
//!
//! Everything is generic over [`Scalar`] so the same code trains in `f32`
//! and is gradient-checked in `f64`. Batch-parallel kernels reduce their
//! per-sample partial results in sample order, so results do not depend on
//! the number of threads.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod resnet;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckOptions};
pub use layers::{BatchNorm2d, Conv2d, GlobalAvgPool, Linear, Relu};
pub use loss::{softmax, softmax_cross_entropy};
pub use optim::{step_scheduler, Adam, Optimizer, OptimizerKind, Sgd};
pub use resnet::{BasicBlock, MicroResNet, MicroResNetConfig};

/// Floating-point element type with a matching GEMM kernel.
pub trait Scalar: Float + NumAssign + Default + Debug + Sum + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;

    /// `C = A·B + beta·C` with `A: m×k`, `B: k×n`, all row-major. `a_t`
    /// (`b_t`) means the slice holds the transpose, i.e. `k×m` (`n×k`).
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_t: bool, b: &[Self], b_t: bool, beta: Self, c: &mut [Self]);
}

fn strides(rows: usize, cols: usize, transposed: bool) -> (isize, isize) {
    if transposed {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }
            fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_t: bool, b: &[Self], b_t: bool, beta: Self, c: &mut [Self]) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too short");
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(m, k, a_t);
                let (rsb, csb) = strides(k, n, b_t);
                // SAFETY: bounds asserted above; strides describe dense row-major
                // storage of the stated shapes and `c` does not alias `a` or `b`.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Dense row-major array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch(format!("shape {shape:?} needs {numel} values, got {}", data.len())));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
            grad: None,
        }
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
            grad: None,
        }
    }

    /// Trainable parameter: zeros with an attached zero gradient.
    pub fn param(shape: &[usize], data: Vec<T>) -> Self {
        let mut t = Tensor::new(shape, data).expect("parameter shape");
        t.grad = Some(vec![T::zero(); t.data.len()]);
        t
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = T::zero()),
            None => self.grad = Some(vec![T::zero(); self.data.len()]),
        }
    }

    pub(crate) fn add_grad(&mut self, g: &[T]) {
        let buf = self.grad.get_or_insert_with(|| vec![T::zero(); g.len()]);
        for (a, &b) in buf.iter_mut().zip(g) {
            *a += b;
        }
    }

    /// `(N, C, H, W)` of a 4-D tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::ShapeMismatch(format!("expected NCHW, got {:?}", self.shape))),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::ShapeMismatch(format!("expected a matrix, got {:?}", self.shape))),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
            grad: self.grad.as_ref().map(|g| g.iter().map(|v| U::of(v.f64())).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A layer (or stack of layers) with an explicit backward pass.
///
/// `forward` caches what `backward` needs; `backward` takes the gradient of
/// the loss with respect to the last output, accumulates parameter
/// gradients and returns the gradient with respect to the input.
pub trait Module<T: Scalar> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;
    /// Trainable tensors in declaration order, with dotted names.
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>));
    /// Non-trainable state (batch-norm running statistics).
    fn visit_buffers(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Tensor<T>)) {}

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |_, t| t.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, t| n += t.numel());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Numeric precision selector for configs and checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}
