use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{make_batch, Example};
use super::metrics::{evaluate, Evaluation};
use super::derive_seed;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::nn::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    /// Stop after this many epochs without a gain in validation accuracy.
    #[serde(default = "default_patience")]
    pub patience: Option<usize>,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
}

fn default_lr() -> f64 {
    2e-4
}
fn default_batch() -> usize {
    32
}
fn default_epochs() -> usize {
    50
}
fn default_repeats() -> usize {
    20
}
fn default_patience() -> Option<usize> {
    Some(10)
}
fn default_clip() -> f64 {
    5.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            batch_size: default_batch(),
            max_epochs: default_epochs(),
            repeats: default_repeats(),
            seed: 0,
            patience: default_patience(),
            clip_norm: default_clip(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.repeats == 0 {
            return Err(Error::Config("batch_size, max_epochs and repeats must be positive".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Running accuracy over the epoch's training batches (dropout active).
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub adam: Adam<f32>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were kept (1-based).
    pub best_epoch: usize,
    /// Every clip that contributed a gradient.
    pub seen_clips: BTreeSet<String>,
}

/// Mini-batch Adam training. With a validation set the weights of the
/// epoch with the best validation accuracy (ties: lower validation loss)
/// are returned; without one, the final weights.
pub fn train(
    model_cfg: &ModelConfig,
    train_set: &[&Example],
    val_set: &[&Example],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train_with_init(model_cfg, train_set, val_set, cfg, seed, &[])
}

/// As [`train`], with layers copied by name from `pretrained` models after
/// initialization (frozen when the config says so).
pub fn train_with_init(
    model_cfg: &ModelConfig,
    train_set: &[&Example],
    val_set: &[&Example],
    cfg: &TrainConfig,
    seed: u64,
    pretrained: &[Model<f32>],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut model = Model::<f32>::new(model_cfg.clone(), derive_seed(seed, &[0]))?;
    for p in pretrained {
        if model.init_from(p) == 0 {
            return Err(Error::Checkpoint(format!(
                "pretrained {} model shares no layers with {}",
                p.config().kind,
                model_cfg.kind
            )));
        }
    }
    let mut adam = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &model.store,
    );
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut seen = BTreeSet::new();
    let mut best: Option<(f64, f64, usize, Model<f32>)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut order_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<&Example> = chunk.iter().map(|&i| train_set[i]).collect();
            seen.extend(items.iter().map(|e| e.clip_id.clone()));
            let batch = make_batch(&items, model_cfg)?;
            let (out, loss) = model.forward_train(&batch, Some(&mut dropout_rng))?;
            let mut grads = model.backward()?;
            if !loss.is_finite() {
                return Err(Error::Invariant(format!("non-finite loss at epoch {epoch}")));
            }
            grads.clip_global_norm(cfg.clip_norm);
            adam.update(&mut model.store, &grads);
            loss_sum += loss * items.len() as f64;
            correct += crate::nn::argmax_rows(&out)
                .iter()
                .zip(&batch.labels)
                .filter(|(p, l)| p == l)
                .count();
        }
        let n = train_set.len() as f64;
        let mut record = EpochRecord {
            epoch,
            loss: loss_sum / n,
            train_accuracy: 100.0 * correct as f64 / n,
            val_accuracy: None,
            val_loss: None,
        };
        if !val_set.is_empty() {
            let ev = evaluate(&model, val_set, cfg.batch_size)?;
            record.val_accuracy = Some(ev.accuracy);
            record.val_loss = Some(ev.loss);
            let (improved, tied_lower) = best.as_ref().map_or((true, false), |(acc, l, _, _)| {
                (ev.accuracy > *acc, ev.accuracy == *acc && ev.loss < *l)
            });
            if improved || tied_lower {
                best = Some((ev.accuracy, ev.loss, epoch, model.clone()));
            }
            // patience counts epochs without a gain in validation accuracy
            if improved {
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        history.push(record);
        if cfg.patience.is_some_and(|p| since_best >= p) {
            break;
        }
    }
    let (model, best_epoch) = match best {
        Some((_, _, e, m)) => (m, e),
        None => {
            let e = history.len();
            (model, e)
        }
    };
    Ok(TrainOutcome {
        model,
        adam,
        history,
        best_epoch,
        seen_clips: seen,
    })
}

/// Accuracy of `model` on the examples it was trained on, without dropout.
pub fn train_accuracy(model: &Model<f32>, examples: &[&Example]) -> Result<Evaluation> {
    evaluate(model, examples, 64)
}
