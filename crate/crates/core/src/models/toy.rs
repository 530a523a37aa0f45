//! Small fixed dimensions for gradient checks and smoke tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Batch, BranchConfig, Model, ModelConfig, ModelKind};
use crate::error::Result;
use crate::features::FeatureKind;
use crate::nn::{check_gradients, AttentionMode, GradReport, Packed, PoolingScheme, Tensor2};

/// Branches with L = 6, n_F = 5 and a three-unit LSTM.
pub fn toy_config(kind: ModelKind, scheme: PoolingScheme) -> ModelConfig {
    let mut cfg = ModelConfig::new(kind).with_pooling(scheme);
    let toy = BranchConfig {
        len: 6,
        n_features: 5,
        n_dense1: 4,
        n_lstm: 3,
        n_dense2: 4,
    };
    cfg.logmel = toy;
    cfg.modspec = BranchConfig { n_dense1: 5, ..toy };
    cfg
}

fn packed(rng: &mut ChaCha8Rng, lengths: &[usize], dim: usize) -> Packed<f64> {
    let rows: usize = lengths.iter().sum();
    let data = (0..rows * dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
    Packed::from_rows(lengths.to_vec(), Tensor2::from_vec(rows, dim, data).expect("sized")).expect("valid lengths")
}

/// Two items with one full-length and one shorter sequence per branch.
pub fn toy_batch(seed: u64, cfg: &ModelConfig) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uses = |k| cfg.kind.branches().contains(&k);
    let (lm, ms) = (cfg.logmel.len, cfg.modspec.len);
    Batch {
        logmel: uses(FeatureKind::Logmel).then(|| packed(&mut rng, &[lm, (lm * 2 / 3).max(1)], cfg.logmel.n_features)),
        modspec: uses(FeatureKind::Modulation).then(|| packed(&mut rng, &[(ms / 2).max(1), ms], cfg.modspec.n_features)),
        labels: vec![2, 0],
    }
}

/// Central-difference check of every parameter of a float64 model on
/// `batch`, with dropout drawn from the same seed in every evaluation.
/// Attention vectors are moved off their constant start first.
pub fn model_gradcheck(cfg: &ModelConfig, batch: &Batch<f64>, seed: u64) -> Result<GradReport> {
    let mut m = Model::<f64>::new(cfg.clone(), seed)?;
    for p in m.store.iter_mut().filter(|p| p.name.ends_with(".u")) {
        p.value.iter_mut().enumerate().for_each(|(i, v)| *v = 0.7 - 0.5 * i as f64);
    }
    let drop_seed = seed ^ 0x5eed;
    let (_, g) = m.loss_and_grads(batch, Some(&mut ChaCha8Rng::seed_from_u64(drop_seed)))?;
    let probe = m.clone();
    Ok(check_gradients(&m.store, &g, 1e-5, |st| {
        let mut q = probe.clone();
        q.store = st.clone();
        q.forward_train(batch, Some(&mut ChaCha8Rng::seed_from_u64(drop_seed)))
            .map(|(_, l)| l)
            .unwrap_or(f64::NAN)
    }))
}

/// Every pooling scheme and attention mode for `kind`.
pub fn pooling_variants() -> Vec<(PoolingScheme, AttentionMode)> {
    vec![
        (PoolingScheme::Last, AttentionMode::SingleSoftmax),
        (PoolingScheme::Mean, AttentionMode::SingleSoftmax),
        (PoolingScheme::Attention, AttentionMode::SingleSoftmax),
        (PoolingScheme::Attention, AttentionMode::LiteralDoubleSoftmax),
    ]
}
