use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{join, Mode, Module, Scalar, Tensor};
use crate::error::{Error, Result};

/// Fan-in normal initialisation, `N(0, gain²/fan_in)`.
pub fn fan_in_normal<T: Scalar>(n: usize, fan_in: usize, gain: f64, rng: &mut impl Rng) -> Vec<T> {
    let normal = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("finite std");
    (0..n).map(|_| T::of(normal.sample(rng))).collect()
}

fn out_size(size: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if size + 2 * pad < k {
        return Err(Error::ShapeMismatch(format!("kernel {k} larger than padded input {size}+2·{pad}")));
    }
    Ok((size + 2 * pad - k) / stride + 1)
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    /// Output columns `[lo, hi)` whose tap `kj` lands inside the input row.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let (s, pad) = (self.stride, self.pad);
        let lo = if pad > kj { (pad - kj).div_ceil(s) } else { 0 }.min(self.ow);
        let hi = if self.w + pad > kj { ((self.w - 1 + pad - kj) / s + 1).min(self.ow) } else { 0 };
        (lo, hi.max(lo))
    }

    /// Unfolds one `C×H×W` sample into a `(C·k·k) × (OH·OW)` matrix.
    fn im2col<T: Scalar>(&self, x: &[T], col: &mut [T]) {
        let cols = self.cols();
        let s = self.stride;
        for c in 0..self.c {
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let row = (c * self.k + ki) * self.k + kj;
                    let dst = &mut col[row * cols..(row + 1) * cols];
                    let (lo, hi) = self.valid_cols(kj);
                    for oy in 0..self.oh {
                        let iy = (oy * s + ki) as isize - self.pad as isize;
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            line.fill(T::zero());
                            continue;
                        }
                        let src = &x[(c * self.h + iy as usize) * self.w..][..self.w];
                        line[..lo].fill(T::zero());
                        line[hi..].fill(T::zero());
                        if lo == hi {
                            continue;
                        }
                        let first = lo * s + kj - self.pad;
                        if s == 1 {
                            line[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                        } else {
                            for (v, ix) in line[lo..hi].iter_mut().zip((first..).step_by(s)) {
                                *v = src[ix];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: scatters and sums columns back.
    fn col2im<T: Scalar>(&self, col: &[T], x: &mut [T]) {
        let cols = self.cols();
        let s = self.stride;
        for c in 0..self.c {
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let row = (c * self.k + ki) * self.k + kj;
                    let src = &col[row * cols..(row + 1) * cols];
                    let (lo, hi) = self.valid_cols(kj);
                    if lo == hi {
                        continue;
                    }
                    let first = lo * s + kj - self.pad;
                    for oy in 0..self.oh {
                        let iy = (oy * s + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut x[(c * self.h + iy as usize) * self.w..][..self.w];
                        let line = &src[oy * self.ow..][lo..hi];
                        if s == 1 {
                            for (d, v) in dst[first..first + hi - lo].iter_mut().zip(line) {
                                *d += *v;
                            }
                        } else {
                            for (v, ix) in line.iter().zip((first..).step_by(s)) {
                                dst[ix] += *v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv_geom<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, stride: usize, pad: usize) -> Result<(usize, usize, ConvGeom)> {
    let (n, c, h, wd) = x.dims4()?;
    let (cout, cin, kh, kw) = w.dims4()?;
    if cin != c || kh != kw || !(kh == 1 || kh == 3) || stride == 0 {
        return Err(Error::ShapeMismatch(format!(
            "conv weights {:?} (stride {stride}) do not fit input {:?}; kernels must be 1x1 or 3x3",
            w.shape, x.shape
        )));
    }
    let geom = ConvGeom {
        c,
        h,
        w: wd,
        k: kh,
        stride,
        pad,
        oh: out_size(h, kh, stride, pad)?,
        ow: out_size(wd, kw, stride, pad)?,
    };
    Ok((n, cout, geom))
}

/// Zero-padded 2D cross-correlation of an NCHW batch.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let (n, cout, g) = conv_geom(x, weight, stride, pad)?;
    if let Some(b) = bias {
        if b.data.len() != cout {
            return Err(Error::ShapeMismatch(format!("bias of {} for {cout} channels", b.data.len())));
        }
    }
    let in_len = g.c * g.h * g.w;
    let out_len = cout * g.cols();
    let mut out = Tensor::zeros(&[n, cout, g.oh, g.ow]);
    out.data
        .par_chunks_mut(out_len)
        .zip(x.data.par_chunks(in_len))
        .for_each_init(Vec::new, |col, (o, xs)| {
            if g.is_pointwise() {
                T::gemm(cout, g.rows(), g.cols(), &weight.data, false, xs, false, T::zero(), o);
            } else {
                col.resize(g.rows() * g.cols(), T::zero());
                g.im2col(xs, col);
                T::gemm(cout, g.rows(), g.cols(), &weight.data, false, &col, false, T::zero(), o);
            }
            if let Some(b) = bias {
                for (co, plane) in o.chunks_mut(g.cols()).enumerate() {
                    plane.iter_mut().for_each(|v| *v += b.data[co]);
                }
            }
        });
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    pad: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (n, cout, g) = conv_geom(x, weight, stride, pad)?;
    if grad_out.shape != [n, cout, g.oh, g.ow] {
        return Err(Error::ShapeMismatch(format!(
            "conv gradient {:?} does not match output [{n}, {cout}, {}, {}]",
            grad_out.shape, g.oh, g.ow
        )));
    }
    let in_len = g.c * g.h * g.w;
    let out_len = cout * g.cols();
    let wlen = weight.data.len();
    let partial: Vec<(Vec<T>, Vec<T>)> = x
        .data
        .par_chunks(in_len)
        .zip(grad_out.data.par_chunks(out_len))
        .map_init(Vec::new, |col, (xs, go)| {
            let mut gw = vec![T::zero(); wlen];
            let mut gx = vec![T::zero(); in_len];
            if g.is_pointwise() {
                T::gemm(cout, g.cols(), g.rows(), go, false, xs, true, T::zero(), &mut gw);
                T::gemm(g.rows(), cout, g.cols(), &weight.data, true, go, false, T::zero(), &mut gx);
            } else {
                col.resize(g.rows() * g.cols(), T::zero());
                g.im2col(xs, col);
                T::gemm(cout, g.cols(), g.rows(), go, false, col, true, T::zero(), &mut gw);
                T::gemm(g.rows(), cout, g.cols(), &weight.data, true, go, false, T::zero(), col);
                g.col2im(col, &mut gx);
            }
            (gx, gw)
        })
        .collect();
    let mut grad_in = Tensor::zeros(&x.shape);
    let mut grad_w = vec![T::zero(); wlen];
    for (i, (gx, gw)) in partial.into_iter().enumerate() {
        grad_in.data[i * in_len..(i + 1) * in_len].copy_from_slice(&gx);
        for (a, b) in grad_w.iter_mut().zip(gw) {
            *a += b;
        }
    }
    let mut grad_b = vec![T::zero(); cout];
    for sample in grad_out.data.chunks(out_len) {
        for (co, plane) in sample.chunks(g.cols()).enumerate() {
            grad_b[co] += plane.iter().copied().sum::<T>();
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

pub struct Conv2d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub stride: usize,
    pub pad: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// `k×k` convolution with "same" padding, fan-in normal weights (relu gain).
    pub fn new(cin: usize, cout: usize, k: usize, stride: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let fan_in = cin * k * k;
        Conv2d {
            weight: Tensor::param(&[cout, cin, k, k], fan_in_normal(cout * fan_in, fan_in, 2f64.sqrt(), rng)),
            bias: bias.then(|| Tensor::param(&[cout], vec![T::zero(); cout])),
            stride,
            pad: k / 2,
            input: None,
        }
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let y = conv2d_forward(x, &self.weight, self.bias.as_ref(), self.stride, self.pad)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| Error::ShapeMismatch("conv backward before forward".into()))?;
        let (gx, gw, gb) = conv2d_backward(x, &self.weight, self.stride, self.pad, grad_out)?;
        self.weight.add_grad(&gw);
        if let Some(b) = &mut self.bias {
            b.add_grad(&gb);
        }
        Ok(gx)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&join(prefix, "bias"), b);
        }
    }
}

/// `Σ f(x)` in f64 with eight interleaved accumulators; the summation
/// order is fixed, so results do not depend on anything but the input.
#[inline]
fn sum_by<T: Scalar>(xs: &[T], f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = xs.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += f(v.f64());
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for v in tail {
        s += f(v.f64());
    }
    s
}

/// `(Σ g, Σ g·x)` with the same fixed accumulation order as [`sum_by`].
#[inline]
fn dot_sums<T: Scalar>(g: &[T], x: &[T]) -> (f64, f64) {
    let (mut sg, mut sgx) = ([0.0f64; 8], [0.0f64; 8]);
    let n = g.len() / 8 * 8;
    for (gc, xc) in g[..n].chunks_exact(8).zip(x[..n].chunks_exact(8)) {
        for k in 0..8 {
            let gv = gc[k].f64();
            sg[k] += gv;
            sgx[k] += gv * xc[k].f64();
        }
    }
    let fold = |a: [f64; 8]| ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7]));
    let (mut a, mut b) = (fold(sg), fold(sgx));
    for (gv, xv) in g[n..].iter().zip(&x[n..]) {
        a += gv.f64();
        b += gv.f64() * xv.f64();
    }
    (a, b)
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

struct BnCache<T> {
    x_hat: Vec<T>,
    inv_std: Vec<f64>,
    mode: Mode,
    shape: Vec<usize>,
}

/// Per-channel batch normalisation over `N·H·W`.
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::param(&[channels], vec![T::one(); channels]),
            beta: Tensor::param(&[channels], vec![T::zero(); channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            cache: None,
        }
    }
}

impl<T: Scalar> Module<T> for BatchNorm2d<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.gamma.numel() {
            return Err(Error::ShapeMismatch(format!("batch norm over {} channels got {c}", self.gamma.numel())));
        }
        if mode == Mode::Train && n < 2 {
            return Err(Error::BatchTooSmall(n));
        }
        let plane = h * w;
        let count = (n * plane) as f64;
        let mut inv_std = vec![0.0; c];
        let mut mean = vec![0.0; c];
        match mode {
            Mode::Train => {
                for ch in 0..c {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += sum_by(&x.data[(b * c + ch) * plane..][..plane], |v| v);
                    }
                    let mu = s / count;
                    let mut ss = 0.0;
                    for b in 0..n {
                        ss += sum_by(&x.data[(b * c + ch) * plane..][..plane], |v| (v - mu) * (v - mu));
                    }
                    let var = ss / count;
                    mean[ch] = mu;
                    inv_std[ch] = 1.0 / (var + self.eps).sqrt();
                    let m = self.momentum;
                    let unbiased = if count > 1.0 { ss / (count - 1.0) } else { var };
                    let rm = &mut self.running_mean.data[ch];
                    *rm = T::of((1.0 - m) * rm.f64() + m * mu);
                    let rv = &mut self.running_var.data[ch];
                    *rv = T::of((1.0 - m) * rv.f64() + m * unbiased);
                }
            }
            Mode::Eval => {
                for ch in 0..c {
                    mean[ch] = self.running_mean.data[ch].f64();
                    inv_std[ch] = 1.0 / (self.running_var.data[ch].f64() + self.eps).sqrt();
                }
            }
        }
        let mut x_hat = vec![T::zero(); x.numel()];
        let mut y = Tensor::zeros(&x.shape);
        for b in 0..n {
            for ch in 0..c {
                let (g, bt) = (self.gamma.data[ch], self.beta.data[ch]);
                let (mu, is) = (T::of(mean[ch]), T::of(inv_std[ch]));
                let off = (b * c + ch) * plane;
                let src = &x.data[off..off + plane];
                let xh = &mut x_hat[off..off + plane];
                let out = &mut y.data[off..off + plane];
                for ((h, o), &v) in xh.iter_mut().zip(out.iter_mut()).zip(src) {
                    *h = (v - mu) * is;
                    *o = g * *h + bt;
                }
            }
        }
        self.cache = Some(BnCache {
            x_hat,
            inv_std,
            mode,
            shape: x.shape.clone(),
        });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| Error::ShapeMismatch("batch norm backward before forward".into()))?;
        if grad_out.shape != cache.shape {
            return Err(Error::ShapeMismatch(format!("gradient {:?} vs {:?}", grad_out.shape, cache.shape)));
        }
        let (n, c, h, w) = (cache.shape[0], cache.shape[1], cache.shape[2], cache.shape[3]);
        let plane = h * w;
        let count = (n * plane) as f64;
        let mut gx = Tensor::zeros(&cache.shape);
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for ch in 0..c {
            let (mut sg, mut sgx) = (0.0, 0.0);
            for b in 0..n {
                let off = (b * c + ch) * plane;
                let (a, bb) = dot_sums(&grad_out.data[off..off + plane], &cache.x_hat[off..off + plane]);
                sg += a;
                sgx += bb;
            }
            dgamma[ch] = T::of(sgx);
            dbeta[ch] = T::of(sg);
            let gamma = self.gamma.data[ch].f64();
            let is = cache.inv_std[ch];
            // dx = k·(g − m_g − x̂·m_gx), with the batch terms dropped in eval mode
            let (k, mg, mgx) = match cache.mode {
                Mode::Train => (gamma * is, sg / count, sgx / count),
                Mode::Eval => (gamma * is, 0.0, 0.0),
            };
            for b in 0..n {
                let off = (b * c + ch) * plane;
                let go = &grad_out.data[off..off + plane];
                let xh = &cache.x_hat[off..off + plane];
                for ((d, &g), &h) in gx.data[off..off + plane].iter_mut().zip(go).zip(xh) {
                    *d = T::of(k * (g.f64() - mg - h.f64() * mgx));
                }
            }
        }
        self.gamma.add_grad(&dgamma);
        self.beta.add_grad(&dbeta);
        Ok(gx)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}

#[derive(Default)]
pub struct Relu<T: Scalar> {
    output: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Relu { output: None }
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(),
        grad: None,
    }
}

impl<T: Scalar> Module<T> for Relu<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let y = relu(x);
        self.output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.output.as_ref().ok_or_else(|| Error::ShapeMismatch("relu backward before forward".into()))?;
        if y.shape != grad_out.shape {
            return Err(Error::ShapeMismatch(format!("gradient {:?} vs {:?}", grad_out.shape, y.shape)));
        }
        Ok(Tensor {
            shape: y.shape.clone(),
            data: y
                .data
                .iter()
                .zip(&grad_out.data)
                .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                .collect(),
            grad: None,
        })
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Tensor<T>)) {}
}

/// `(N, C, H, W) → (N, C)` spatial mean.
#[derive(Default)]
pub struct GlobalAvgPool {
    shape: Vec<usize>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool { shape: Vec::new() }
    }
}

impl<T: Scalar> Module<T> for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4()?;
        let plane = h * w;
        let data = x
            .data
            .chunks(plane)
            .map(|p| T::of(p.iter().map(|v| v.f64()).sum::<f64>() / plane as f64))
            .collect();
        self.shape = x.shape.clone();
        Tensor::new(&[n, c], data)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, c, h, w] = self.shape[..] else {
            return Err(Error::ShapeMismatch("pool backward before forward".into()));
        };
        if grad_out.shape != [n, c] {
            return Err(Error::ShapeMismatch(format!("gradient {:?} vs [{n}, {c}]", grad_out.shape)));
        }
        let scale = T::of(1.0 / (h * w) as f64);
        let data = grad_out.data.iter().flat_map(|&g| std::iter::repeat_n(g * scale, h * w)).collect();
        Tensor::new(&self.shape, data)
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Tensor<T>)) {}
}

/// `y = x·Wᵀ + b` with `W: out × in`.
pub struct Linear<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    /// Fan-in normal weights with gain 1/√3, the variance of PyTorch's default
    /// `U(±1/√fan_in)` head. Initial logits stay small, so the first loss is near `ln C`.
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Linear {
            weight: Tensor::param(&[outputs, inputs], fan_in_normal(outputs * inputs, inputs, 3f64.sqrt().recip(), rng)),
            bias: Tensor::param(&[outputs], vec![T::zero(); outputs]),
            input: None,
        }
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (n, fin) = x.dims2()?;
        let (fout, win) = self.weight.dims2()?;
        if fin != win {
            return Err(Error::ShapeMismatch(format!("linear expects {win} features, got {fin}")));
        }
        let mut y = Tensor::zeros(&[n, fout]);
        T::gemm(n, fin, fout, &x.data, false, &self.weight.data, true, T::zero(), &mut y.data);
        for row in y.data.chunks_mut(fout) {
            for (v, &b) in row.iter_mut().zip(&self.bias.data) {
                *v += b;
            }
        }
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| Error::ShapeMismatch("linear backward before forward".into()))?;
        let (n, fin) = x.dims2()?;
        let fout = self.bias.numel();
        if grad_out.shape != [n, fout] {
            return Err(Error::ShapeMismatch(format!("gradient {:?} vs [{n}, {fout}]", grad_out.shape)));
        }
        let mut gx = Tensor::zeros(&[n, fin]);
        T::gemm(n, fout, fin, &grad_out.data, false, &self.weight.data, false, T::zero(), &mut gx.data);
        let mut gw = vec![T::zero(); fout * fin];
        T::gemm(fout, n, fin, &grad_out.data, true, &x.data, false, T::zero(), &mut gw);
        let mut gb = vec![T::zero(); fout];
        for row in grad_out.data.chunks(fout) {
            for (a, &g) in gb.iter_mut().zip(row) {
                *a += g;
            }
        }
        self.weight.add_grad(&gw);
        self.bias.add_grad(&gb);
        Ok(gx)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
