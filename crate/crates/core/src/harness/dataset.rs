use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{read_feature_file, FeatureExtractor, FeatureKind, FeatureSequence};
use crate::models::{Batch, ModelConfig};
use crate::nn::{Packed, Tensor2};
use crate::signal::{load_wav, CorpusManifest};

/// One labeled clip with its prepared feature sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub clip_id: String,
    pub speaker_id: String,
    pub label: usize,
    pub logmel: Option<FeatureSequence>,
    pub modspec: Option<FeatureSequence>,
}

impl Example {
    pub fn features(&self, kind: FeatureKind) -> Option<&FeatureSequence> {
        match kind {
            FeatureKind::Logmel => self.logmel.as_ref(),
            FeatureKind::Modulation => self.modspec.as_ref(),
        }
    }
}

/// Conventional feature file name for a clip.
pub fn feature_path(dir: &Path, clip_id: &str, kind: FeatureKind) -> PathBuf {
    dir.join(format!("{clip_id}.{}.ikft", kind.name()))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    /// Loads every clip of `manifest` and extracts the requested features,
    /// normalized and padded to the canonical lengths.
    pub fn from_manifest(
        manifest: &CorpusManifest,
        kinds: &[FeatureKind],
        extractor: &FeatureExtractor,
        lens: &BTreeMap<FeatureKind, usize>,
    ) -> Result<Self> {
        let examples = manifest
            .entries
            .par_iter()
            .map(|e| {
                let clip = load_wav(manifest.resolve(e))?;
                let mut ex = Example {
                    clip_id: e.clip_id.clone(),
                    speaker_id: e.speaker_id.clone(),
                    label: e.class.index(),
                    logmel: None,
                    modspec: None,
                };
                for &k in kinds {
                    let len = lens.get(&k).copied().unwrap_or(k.default_len());
                    let seq = extractor.prepare(&clip, k, Some(len))?;
                    match k {
                        FeatureKind::Logmel => ex.logmel = Some(seq),
                        FeatureKind::Modulation => ex.modspec = Some(seq),
                    }
                }
                Ok(ex)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { examples })
    }

    /// Reads precomputed feature files named by [`feature_path`].
    pub fn from_feature_dir(manifest: &CorpusManifest, dir: &Path, kinds: &[FeatureKind]) -> Result<Self> {
        let examples = manifest
            .entries
            .iter()
            .map(|e| {
                let mut ex = Example {
                    clip_id: e.clip_id.clone(),
                    speaker_id: e.speaker_id.clone(),
                    label: e.class.index(),
                    logmel: None,
                    modspec: None,
                };
                for &k in kinds {
                    let path = feature_path(dir, &e.clip_id, k);
                    if !path.exists() {
                        return Err(Error::Validation(format!(
                            "clip {} has no {} features ({})",
                            e.clip_id,
                            k.name(),
                            path.display()
                        )));
                    }
                    let seq = read_feature_file(&path)?;
                    if seq.kind() != k {
                        return Err(Error::FeatureFile(format!(
                            "{} holds {} features",
                            path.display(),
                            seq.kind().name()
                        )));
                    }
                    match k {
                        FeatureKind::Logmel => ex.logmel = Some(seq),
                        FeatureKind::Modulation => ex.modspec = Some(seq),
                    }
                }
                Ok(ex)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Examples whose speaker is in `speakers`, in dataset order.
    pub fn for_speakers(&self, speakers: &BTreeSet<&str>) -> Vec<&Example> {
        self.examples
            .iter()
            .filter(|e| speakers.contains(e.speaker_id.as_str()))
            .collect()
    }

    pub fn find(&self, clip_id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.clip_id == clip_id)
    }
}

fn pack(examples: &[&Example], kind: FeatureKind, len: usize, dim: usize) -> Result<Packed<f32>> {
    let mut lengths = Vec::with_capacity(examples.len());
    let mut data = Vec::new();
    for e in examples {
        let seq = e.features(kind).ok_or_else(|| {
            Error::Validation(format!("clip {} is missing {} features", e.clip_id, kind.name()))
        })?;
        if seq.n_features() != dim {
            return Err(Error::Shape(format!(
                "clip {}: {} features have {} dims, model expects {dim}",
                e.clip_id,
                kind.name(),
                seq.n_features()
            )));
        }
        let valid = seq.valid_frames().min(len);
        if valid == 0 {
            return Err(Error::Validation(format!("clip {} has no valid frames", e.clip_id)));
        }
        lengths.push(valid);
        data.extend_from_slice(&seq.valid_values()[..valid * dim]);
    }
    let rows = data.len() / dim;
    Packed::from_rows(lengths, Tensor2::from_vec(rows, dim, data)?)
}

/// Packs the branches `cfg` consumes for `examples`, cutting each sequence
/// to its branch length.
pub fn make_batch(examples: &[&Example], cfg: &ModelConfig) -> Result<Batch<f32>> {
    let mut batch = Batch {
        logmel: None,
        modspec: None,
        labels: examples.iter().map(|e| e.label).collect(),
    };
    for &k in cfg.kind.branches() {
        let b = cfg.branch(k);
        let p = pack(examples, k, b.len, b.n_features)?;
        match k {
            FeatureKind::Logmel => batch.logmel = Some(p),
            FeatureKind::Modulation => batch.modspec = Some(p),
        }
    }
    Ok(batch)
}
