use super::{
    logmel, modspec_with_bank, normalize_utterance, pad_or_cut, FeatureKind, FeatureSequence,
    GammatoneBank, LogMelConfig, ModSpecConfig,
};
use crate::error::Result;
use crate::signal::AudioClip;

/// Both extractors with their shared filterbank built once.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub logmel: LogMelConfig,
    pub modspec: ModSpecConfig,
    bank: GammatoneBank,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new(LogMelConfig::default(), ModSpecConfig::default()).expect("default configs are valid")
    }
}

impl FeatureExtractor {
    pub fn new(logmel: LogMelConfig, modspec: ModSpecConfig) -> Result<Self> {
        logmel.validate()?;
        modspec.validate()?;
        let bank = GammatoneBank::new(&modspec);
        Ok(Self {
            logmel,
            modspec,
            bank,
        })
    }

    /// Raw (unnormalized, unpadded) features.
    pub fn extract(&self, clip: &AudioClip, kind: FeatureKind) -> Result<FeatureSequence> {
        match kind {
            FeatureKind::Logmel => logmel(clip, &self.logmel),
            FeatureKind::Modulation => modspec_with_bank(clip, &self.modspec, &self.bank),
        }
    }

    /// Utterance-normalized features, padded or cut to `len` when given.
    pub fn prepare(&self, clip: &AudioClip, kind: FeatureKind, len: Option<usize>) -> Result<FeatureSequence> {
        let seq = normalize_utterance(&self.extract(clip, kind)?);
        Ok(match len {
            Some(l) => pad_or_cut(&seq, l),
            None => seq,
        })
    }

    pub fn frame_secs(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::Logmel => self.logmel.hop_ms / 1000.0,
            FeatureKind::Modulation => self.modspec.hop_ms / 1000.0,
        }
    }
}
