use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::CorpusManifest;
use crate::error::{Error, Result};

/// Fold roles for one experiment rotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rotation {
    pub test: usize,
    /// `None` only when k = 2, where no fold is left over for validation and
    /// model selection falls back to the training fold.
    pub validation: Option<usize>,
    pub train: Vec<usize>,
}

/// Subject-wise fold assignment plus the rotation schedule
/// (test = r, validation = (r + 1) mod k).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
    pub rotations: Vec<Rotation>,
}

impl FoldPlan {
    pub fn fold_of(&self, speaker: &str) -> Option<usize> {
        self.assignments.get(speaker).copied()
    }

    pub fn speakers_in(&self, fold: usize) -> BTreeSet<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    fn speakers_in_folds(&self, folds: &[usize]) -> BTreeSet<&str> {
        folds.iter().flat_map(|&f| self.speakers_in(f)).collect()
    }

    pub fn train_speakers(&self, rotation: usize) -> BTreeSet<&str> {
        self.speakers_in_folds(&self.rotations[rotation].train)
    }

    pub fn validation_speakers(&self, rotation: usize) -> BTreeSet<&str> {
        match self.rotations[rotation].validation {
            Some(v) => self.speakers_in(v),
            None => BTreeSet::new(),
        }
    }

    pub fn test_speakers(&self, rotation: usize) -> BTreeSet<&str> {
        self.speakers_in(self.rotations[rotation].test)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Splits the manifest's speakers into `k` folds balanced by speaker count.
pub fn plan_folds(manifest: &CorpusManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    let mut speakers: Vec<String> = manifest.speakers();
    plan_speaker_folds(&mut speakers, k, seed)
}

pub fn plan_speaker_folds(speakers: &mut Vec<String>, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    speakers.sort();
    speakers.dedup();
    if speakers.len() < k {
        return Err(Error::Config(format!(
            "{} distinct speakers cannot fill {k} folds",
            speakers.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    speakers.shuffle(&mut rng);
    let assignments = speakers
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i % k))
        .collect();
    let rotations = (0..k)
        .map(|test| {
            let validation = (k > 2).then_some((test + 1) % k);
            let train = (0..k)
                .filter(|&f| f != test && Some(f) != validation)
                .collect();
            Rotation {
                test,
                validation,
                train,
            }
        })
        .collect();
    Ok(FoldPlan {
        k,
        seed,
        assignments,
        rotations,
    })
}
