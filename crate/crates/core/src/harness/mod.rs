//! Training, evaluation and speaker-independent cross-validation.

mod cv;
mod dataset;
mod metrics;
mod train;

use serde::{Deserialize, Serialize};

pub use cv::{rotation_split, run_cv, CvOptions, EvalReport, FoldResult};
pub use dataset::{feature_path, make_batch, Dataset, Example};
pub use metrics::{evaluate, summarize, ConfusionMatrix, Evaluation};
pub use train::{train, train_accuracy, train_with_init, EpochRecord, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::models::Model;
use crate::nn::PoolingScheme;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a path of tags below `master`.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(master), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Pooling weight over time for one clip and branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub clip_id: String,
    pub kind: FeatureKind,
    pub hop_secs: f64,
    /// (time in seconds, weight)
    pub points: Vec<(f64, f64)>,
}

impl AttentionTrace {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("time\tweight\n");
        for (t, w) in &self.points {
            s.push_str(&format!("{t:.3}\t{w:.6e}\n"));
        }
        s
    }
}

/// Per-frame pooling weights of every branch for one clip.
pub fn export_attention(model: &Model<f32>, example: &Example) -> Result<Vec<AttentionTrace>> {
    if model.config().pooling.scheme == PoolingScheme::Last {
        return Err(Error::UnsupportedScheme(
            "last-frame pooling has no per-frame weights".into(),
        ));
    }
    let batch = make_batch(&[example], model.config())?;
    Ok(model
        .frame_weights(&batch)?
        .into_iter()
        .map(|bw| {
            let hop = bw.kind.default_hop_secs();
            AttentionTrace {
                clip_id: example.clip_id.clone(),
                kind: bw.kind,
                hop_secs: hop,
                points: bw.weights[0].iter().enumerate().map(|(i, &w)| (i as f64 * hop, w)).collect(),
            }
        })
        .collect())
}
