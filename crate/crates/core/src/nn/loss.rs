use crate::error::{data_err, shape_err, Result};
use crate::tensor::Tensor;

/// Row-wise softmax of a `[N, K]` tensor with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let k = match *logits.shape() {
        [_, k] => k,
        _ => return shape_err(format!("softmax expects [N, K], got {:?}", logits.shape())),
    };
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::from_vec(logits.shape(), out)
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits, `(softmax - onehot) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (n, k) = match *logits.shape() {
        [n, k] => (n, k),
        _ => return shape_err(format!("loss expects [N, K] logits, got {:?}", logits.shape())),
    };
    if labels.len() != n {
        return shape_err(format!("{} labels for a batch of {n}", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return data_err(format!("label {bad} out of range for {k} classes"));
    }
    let mut grad = logits.data().to_vec();
    let mut loss = 0.0;
    for (row, &label) in grad.chunks_exact_mut(k).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[label] - max - log_sum;
        for v in row.iter_mut() {
            *v = (*v - max - log_sum).exp() / n as f64;
        }
        row[label] -= 1.0 / n as f64;
    }
    Ok((loss / n as f64, Tensor::from_vec(&[n, k], grad)?))
}
