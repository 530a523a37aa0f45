use super::tensor::{Scalar, Tensor2};
use crate::error::{Error, Result};

/// Row-wise softmax.
pub fn softmax<T: Scalar>(logits: &Tensor2<T>) -> Tensor2<T> {
    let mut out = logits.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Element-wise logistic scores; rows are not normalized.
pub fn sigmoid_head<T: Scalar>(x: &Tensor2<T>) -> Tensor2<T> {
    let mut out = x.clone();
    out.data.iter_mut().for_each(|v| *v = super::tensor::sigmoid(*v));
    out
}

/// Rescales every row to sum to one.
pub fn renormalize<T: Scalar>(scores: &Tensor2<T>) -> Tensor2<T> {
    let mut out = scores.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let sum: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn check_labels<T: Scalar>(pred: &Tensor2<T>, labels: &[usize]) -> Result<()> {
    if labels.len() != pred.rows {
        return Err(Error::Shape(format!(
            "{} labels for {} predictions",
            labels.len(),
            pred.rows
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= pred.cols) {
        return Err(Error::Index {
            label: bad,
            classes: pred.cols,
        });
    }
    Ok(())
}

/// Mean over the batch of `−ln p[label]`, for rows that are distributions.
pub fn cross_entropy<T: Scalar>(pred: &Tensor2<T>, labels: &[usize]) -> Result<f64> {
    check_labels(pred, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -pred.at(r, l).f64().max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(total / labels.len().max(1) as f64)
}

/// Softmax cross-entropy: returns the loss and `dL/dlogits` given the
/// softmax probabilities.
pub fn softmax_ce_grad<T: Scalar>(probs: &Tensor2<T>, labels: &[usize]) -> Result<(f64, Tensor2<T>)> {
    let loss = cross_entropy(probs, labels)?;
    let scale = T::one() / T::of(labels.len() as f64);
    let mut d = probs.clone();
    for (r, &l) in labels.iter().enumerate() {
        let row = d.row_mut(r);
        row[l] -= T::one();
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss, d))
}

/// Cross-entropy of renormalized sigmoid scores `q = s / Σs`: returns the loss
/// and `dL/ds`.
pub fn sigmoid_ce_grad<T: Scalar>(scores: &Tensor2<T>, labels: &[usize]) -> Result<(f64, Tensor2<T>)> {
    let loss = cross_entropy(&renormalize(scores), labels)?;
    let scale = T::one() / T::of(labels.len() as f64);
    let mut d = Tensor2::zeros(scores.rows, scores.cols);
    for (r, &l) in labels.iter().enumerate() {
        let s = scores.row(r);
        let sum: T = s.iter().copied().sum();
        let row = d.row_mut(r);
        row.iter_mut().for_each(|v| *v = scale / sum);
        row[l] -= scale / s[l];
    }
    Ok((loss, d))
}

/// Index of the largest entry of every row.
pub fn argmax_rows<T: Scalar>(x: &Tensor2<T>) -> Vec<usize> {
    (0..x.rows)
        .map(|r| {
            let row = x.row(r);
            (0..row.len())
                .fold(0, |best, j| if row[j] > row[best] { j } else { best })
        })
        .collect()
}
