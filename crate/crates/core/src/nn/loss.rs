use super::Tensor;
use crate::error::{ensure, Result};

/// Mean squared error over every element, and its gradient.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    ensure!(pred.shape() == target.shape(), "mse of {:?} against {:?}", pred.shape(), target.shape());
    ensure!(!pred.is_empty(), "mse of empty tensors");
    let n = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut sum = 0.0f64;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p as f64 - t as f64;
        sum += d * d;
        *g = (2.0 * d / n) as f32;
    }
    Ok((sum / n, grad))
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
    let e: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean softmax cross-entropy over a `[N, classes]` batch, and its gradient.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let s = logits.shape();
    ensure!(s.len() == 2 && s[0] == labels.len() && s[0] > 0, "logits {s:?} against {} labels", labels.len());
    let (n, k) = (s[0], s[1]);
    let mut grad = Tensor::zeros(s);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        ensure!(y < k, "label {y} outside {k} classes");
        let p = softmax(&logits.data()[i * k..(i + 1) * k]);
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        for (j, (gj, pj)) in g.iter_mut().zip(&p).enumerate() {
            *gj = ((pj - if j == y { 1.0 } else { 0.0 }) / n as f64) as f32;
        }
    }
    Ok((loss / n as f64, grad))
}
