use super::Tensor;
use crate::error::{Error, Result};

/// Mean of squared differences over all components, with its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape != target.shape {
        return Err(Error::ShapeMismatch(format!("mse: {:?} vs {:?}", pred.shape, target.shape)));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor { shape: pred.shape.clone(), data: grad }))
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Negative log-likelihood of `label` under `softmax(logits)`, scaled by `weight`.
/// Gradient is `weight * (softmax(logits) - one_hot(label))`.
pub fn cross_entropy(logits: &Tensor, label: usize, weight: f64) -> (f64, Tensor) {
    let m = logits.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.data.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    let loss = weight * (lse - logits.data[label]);
    let mut grad = softmax(&logits.data);
    grad[label] -= 1.0;
    grad.iter_mut().for_each(|g| *g *= weight);
    (loss, Tensor { shape: logits.shape.clone(), data: grad })
}
