use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Example};
use super::metrics::{evaluate, summarize, ConfusionMatrix};
use super::train::{train, TrainConfig};
use super::{derive_seed, export_attention, AttentionTrace};
use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::nn::PoolingScheme;
use crate::signal::FoldPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub rotation: usize,
    pub test_speakers: Vec<String>,
    pub n_test: usize,
    pub accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Cross-validation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub k: usize,
    pub folds: Vec<FoldResult>,
    /// Mean test accuracy over the rotations of each repeat.
    pub repeat_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub ci95: f64,
    /// Row = true class, percentages over all test decisions.
    pub confusion: Vec<Vec<f64>>,
    pub confusion_counts: ConfusionMatrix,
    #[serde(default)]
    pub attention: Vec<AttentionTrace>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Default)]
pub struct CvOptions {
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    /// Clips whose attention traces are exported from the first repeat.
    pub trace_clips: Vec<String>,
}

struct TaskOutput {
    fold: FoldResult,
    confusion: ConfusionMatrix,
    traces: Vec<AttentionTrace>,
}

/// Trains a fresh model per (repeat, rotation) and evaluates it on the
/// rotation's test speakers. The fold plan is fixed across repeats; repeats
/// differ in initialization and batch order.
pub fn run_cv(
    data: &Dataset,
    plan: &FoldPlan,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    opts: &CvOptions,
) -> Result<EvalReport> {
    cfg.validate()?;
    model_cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.repeats)
        .flat_map(|r| (0..plan.k).map(move |f| (r, f)))
        .collect();
    let run = |&(repeat, rotation): &(usize, usize)| -> Result<TaskOutput> {
        let test_spk = plan.test_speakers(rotation);
        let test = data.for_speakers(&test_spk);
        let train_set = data.for_speakers(&plan.train_speakers(rotation));
        let val = data.for_speakers(&plan.validation_speakers(rotation));
        let seed = derive_seed(cfg.seed, &[repeat as u64, rotation as u64]);
        let outcome = train(model_cfg, &train_set, &val, cfg, seed)?;
        if let Some(leak) = test.iter().find(|e| outcome.seen_clips.contains(&e.clip_id)) {
            return Err(Error::Invariant(format!("test clip {} was used in training", leak.clip_id)));
        }
        let ev = evaluate(&outcome.model, &test, cfg.batch_size)?;
        let mut traces = Vec::new();
        if repeat == 0 && model_cfg.pooling.scheme != PoolingScheme::Last {
            for e in test.iter().filter(|e| opts.trace_clips.contains(&e.clip_id)) {
                traces.extend(export_attention(&outcome.model, e)?);
            }
        }
        Ok(TaskOutput {
            fold: FoldResult {
                repeat,
                rotation,
                test_speakers: test_spk.iter().map(|s| s.to_string()).collect(),
                n_test: test.len(),
                accuracy: ev.accuracy,
                best_epoch: outcome.best_epoch,
                epochs_run: outcome.history.len(),
            },
            confusion: ev.confusion,
            traces,
        })
    };
    let outputs: Vec<TaskOutput> = if opts.jobs == 1 {
        tasks.iter().map(run).collect::<Result<_>>()?
    } else if opts.jobs == 0 {
        tasks.par_iter().map(run).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| tasks.par_iter().map(run).collect::<Result<_>>())?
    };
    Ok(aggregate(model_cfg, cfg, plan.k, outputs))
}

fn aggregate(model_cfg: &ModelConfig, cfg: &TrainConfig, k: usize, outputs: Vec<TaskOutput>) -> EvalReport {
    let mut confusion = ConfusionMatrix::new(model_cfg.n_classes);
    let mut folds = Vec::new();
    let mut attention = Vec::new();
    for o in outputs {
        confusion.add(&o.confusion);
        folds.push(o.fold);
        attention.extend(o.traces);
    }
    let repeat_accuracies: Vec<f64> = (0..cfg.repeats)
        .map(|r| {
            let accs: Vec<f64> = folds.iter().filter(|f| f.repeat == r).map(|f| f.accuracy).collect();
            summarize(&accs).0
        })
        .collect();
    let (mean, std, ci) = summarize(&repeat_accuracies);
    EvalReport {
        model: model_cfg.clone(),
        train: cfg.clone(),
        k,
        folds,
        repeat_accuracies,
        mean_accuracy: mean,
        std_accuracy: std,
        ci95: ci,
        confusion: confusion.percentages(),
        confusion_counts: confusion,
        attention,
    }
}

/// Test examples of one rotation, exposed for leakage checks.
pub fn rotation_split<'a>(data: &'a Dataset, plan: &FoldPlan, rotation: usize) -> [Vec<&'a Example>; 3] {
    [
        data.for_speakers(&plan.train_speakers(rotation)),
        data.for_speakers(&plan.validation_speakers(rotation)),
        data.for_speakers(&plan.test_speakers(rotation)),
    ]
}
