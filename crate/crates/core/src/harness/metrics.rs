use serde::{Deserialize, Serialize};

use super::dataset::{make_batch, Example};
use crate::error::Result;
use crate::models::Model;
use crate::nn::{argmax_rows, cross_entropy, renormalize};

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs(n: usize, labels: &[usize], predictions: &[usize]) -> Self {
        let mut m = Self::new(n);
        for (&l, &p) in labels.iter().zip(predictions) {
            m.counts[l][p] += 1;
        }
        m
    }

    pub fn add(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Row-normalized percentages; empty rows stay zero.
    pub fn percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: usize = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        100.0 * diag as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub clip_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
    /// Percentage of correctly classified clips.
    pub accuracy: f64,
    /// Mean cross-entropy (renormalized for sigmoid heads).
    pub loss: f64,
    pub confusion: ConfusionMatrix,
}

/// Argmax decision per clip.
pub fn evaluate(model: &Model<f32>, examples: &[&Example], batch_size: usize) -> Result<Evaluation> {
    let cfg = model.config();
    let mut predictions = Vec::with_capacity(examples.len());
    let mut loss_sum = 0.0;
    for chunk in examples.chunks(batch_size.max(1)) {
        let batch = make_batch(chunk, cfg)?;
        let out = model.predict(&batch)?;
        let probs = if model.sigmoid_head() { renormalize(&out) } else { out.clone() };
        loss_sum += cross_entropy(&probs, &batch.labels)? * chunk.len() as f64;
        predictions.extend(argmax_rows(&out));
    }
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let confusion = ConfusionMatrix::from_pairs(cfg.n_classes, &labels, &predictions);
    Ok(Evaluation {
        clip_ids: examples.iter().map(|e| e.clip_id.clone()).collect(),
        accuracy: confusion.accuracy(),
        loss: if examples.is_empty() { 0.0 } else { loss_sum / examples.len() as f64 },
        labels,
        predictions,
        confusion,
    })
}

/// Mean, sample standard deviation and 95% normal-approximation half-width.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    (mean, std, 1.96 * std / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictor_is_identity() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let m = ConfusionMatrix::from_pairs(3, &labels, &labels);
        assert_eq!(m.accuracy(), 100.0);
        let p = m.percentages();
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 100.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn random_predictor_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels: Vec<usize> = (0..10_000).map(|i| i % 3).collect();
        let preds: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..3)).collect();
        let acc = ConfusionMatrix::from_pairs(3, &labels, &preds).accuracy();
        assert!((acc - 100.0 / 3.0).abs() < 2.0, "{acc}");
    }

    #[test]
    fn accuracy_is_prior_weighted_recall() {
        let labels = [0, 0, 0, 1, 1, 2, 2, 2, 2, 2];
        let preds = [0, 1, 0, 1, 2, 2, 2, 0, 2, 1];
        let m = ConfusionMatrix::from_pairs(3, &labels, &preds);
        let p = m.percentages();
        for row in &p {
            let s: f64 = row.iter().sum();
            assert!((s - 100.0).abs() < 0.1);
        }
        let priors = [0.3, 0.2, 0.5];
        let weighted: f64 = (0..3).map(|i| p[i][i] * priors[i]).sum();
        assert!((weighted - m.accuracy()).abs() < 1e-9);
        assert_eq!(m.accuracy(), 60.0);
    }

    #[test]
    fn summary_statistics() {
        let (m, s, ci) = summarize(&[80.0, 90.0, 100.0]);
        assert_eq!(m, 90.0);
        assert!((s - 10.0).abs() < 1e-12);
        assert!((ci - 1.96 * 10.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[5.0]), (5.0, 0.0, 0.0));
    }
}
