//! Audio ingestion, corpus manifests and subject-wise fold planning.

mod folds;
mod manifest;
mod wav;

pub use folds::{plan_folds, plan_speaker_folds, FoldPlan, Rotation};
pub use manifest::{
    parse_manifest, parse_manifest_str, CorpusManifest, IntelligibilityClass, ManifestEntry,
    MANIFEST_HEADER,
};
pub use wav::{load_wav, load_wav_channel, to_pcm16, write_wav, AudioClip, SAMPLE_RATE};
