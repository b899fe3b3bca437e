use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Row-wise softmax of a `B × C` matrix, computed with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, c) = logits.dims2()?;
    let mut out = Tensor::zeros(&logits.shape);
    for (row, dst) in logits.data.chunks(c).zip(out.data.chunks_mut(c)) {
        let max = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.f64() - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (d, e) in dst.iter_mut().zip(exps) {
            *d = T::of(e / sum);
        }
    }
    Ok(out)
}

/// Mean negative log-likelihood and its gradient `(softmax − onehot)/B`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let (b, c) = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::ShapeMismatch(format!("{} labels for {b} rows", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange { label, classes: c });
    }
    let mut grad = Tensor::zeros(&logits.shape);
    let mut loss = 0.0;
    for ((row, dst), &label) in logits.data.chunks(c).zip(grad.data.chunks_mut(c)).zip(labels) {
        let max = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.f64() - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[label].f64();
        for (j, d) in dst.iter_mut().enumerate() {
            let p = (row[j].f64() - log_z).exp();
            let onehot = if j == label { 1.0 } else { 0.0 };
            *d = T::of((p - onehot) / b as f64);
        }
    }
    Ok((loss / b as f64, grad))
}
