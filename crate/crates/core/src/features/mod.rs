//! Per-frame log-mel and modulation spectrograms, utterance normalization,
//! fixed-length padding and the compact utterance-level vectors.

mod analysis;
mod compact;
mod file;
mod gammatone;
mod hilbert;
mod logmel;
mod modspec;
mod normalize;
mod pipeline;
mod stft;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SAMPLE_RATE;

pub use analysis::{band_energy_profile, corr_map, relative_energy, BandEnergyProfile};
pub use compact::{avg_mfcc, avg_modspec, dct_ii_orthonormal, MFCC_COEFFS};
pub use file::{
    decode_features, encode_features, read_feature_file, write_feature_file, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use gammatone::{erb_bandwidth, erb_rate, erb_rate_inv, gammatone_centers, GammatoneBank};
pub use hilbert::{analytic_signal, fast_len, hilbert_envelope, HilbertPlan};
pub use logmel::{hz_to_mel, logmel, mel_band_centers, mel_filterbank, mel_to_hz, LOG_FLOOR};
pub use modspec::{modspec, modspec_with_bank, modulation_centers, ModulationFilter};
pub use normalize::{normalize_utterance, pad_or_cut, PAD_VALUE};
pub use pipeline::FeatureExtractor;
pub use stft::{hamming, stft, Spectrogram};

/// Number of centered frames for a signal of `len` samples at `hop`.
pub fn frame_count(len: usize, hop: usize) -> usize {
    if len == 0 {
        0
    } else {
        (len - 1) / hop + 1
    }
}

/// Mirror-reflects an out-of-range index back into `0..n` (edge sample not
/// repeated). Works for any offset, including signals shorter than the pad.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub(crate) fn ms_to_samples(ms: f64, rate: f64) -> usize {
    (ms * rate / 1000.0).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Logmel,
    Modulation,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Logmel => 0,
            FeatureKind::Modulation => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FeatureKind::Logmel),
            1 => Some(FeatureKind::Modulation),
            _ => None,
        }
    }

    /// Canonical padded length (7 s of frames).
    pub fn default_len(self) -> usize {
        match self {
            FeatureKind::Logmel => 700,
            FeatureKind::Modulation => 110,
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            FeatureKind::Logmel => 32,
            FeatureKind::Modulation => 184,
        }
    }

    /// Frame period in seconds.
    pub fn default_hop_secs(self) -> f64 {
        match self {
            FeatureKind::Logmel => 0.010,
            FeatureKind::Modulation => 0.064,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Logmel => "logmel",
            FeatureKind::Modulation => "modspec",
        }
    }
}

/// A row-major `rows × n_features` matrix of frames with a validity mask.
///
/// Unpadded sequences have `rows == native_frames` and an all-true mask.
/// After [`pad_or_cut`] the mask is a true prefix of `min(T, L)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    kind: FeatureKind,
    values: Vec<f32>,
    mask: Vec<bool>,
    native_frames: usize,
    n_features: usize,
}

impl FeatureSequence {
    pub fn new(kind: FeatureKind, n_features: usize, values: Vec<f32>) -> Result<Self> {
        if n_features == 0 || values.len() % n_features != 0 {
            return Err(Error::Shape(format!(
                "{} values cannot form rows of {n_features}",
                values.len()
            )));
        }
        let rows = values.len() / n_features;
        Ok(Self {
            kind,
            values,
            mask: vec![true; rows],
            native_frames: rows,
            n_features,
        })
    }

    pub(crate) fn from_parts(
        kind: FeatureKind,
        n_features: usize,
        native_frames: usize,
        values: Vec<f32>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if n_features == 0 || values.len() != mask.len() * n_features {
            return Err(Error::Shape(format!(
                "{} values do not match {} rows of {n_features}",
                values.len(),
                mask.len()
            )));
        }
        let valid = mask.iter().take_while(|&&m| m).count();
        if mask[valid..].iter().any(|&m| m) {
            return Err(Error::Validation("mask is not a true prefix".into()));
        }
        if valid != native_frames.min(mask.len()) {
            return Err(Error::Validation(format!(
                "mask has {valid} valid rows, expected min({native_frames}, {})",
                mask.len()
            )));
        }
        Ok(Self {
            kind,
            values,
            mask,
            native_frames,
            n_features,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// Native (pre-padding) frame count T.
    pub fn native_frames(&self) -> usize {
        self.native_frames
    }

    /// Stored row count (L once padded).
    pub fn rows(&self) -> usize {
        self.mask.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn valid_frames(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.n_features..(t + 1) * self.n_features]
    }

    pub fn at(&self, t: usize, f: usize) -> f32 {
        self.values[t * self.n_features + f]
    }

    /// Values of the valid prefix only.
    pub fn valid_values(&self) -> &[f32] {
        &self.values[..self.valid_frames() * self.n_features]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMelConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            window_ms: 20.0,
            hop_ms: 10.0,
            n_mels: 32,
            fft_size: 512,
            fmin: 0.0,
            fmax: 8000.0,
        }
    }
}

impl LogMelConfig {
    pub fn window_samples(&self) -> usize {
        ms_to_samples(self.window_ms, SAMPLE_RATE as f64)
    }

    pub fn hop_samples(&self) -> usize {
        ms_to_samples(self.hop_ms, SAMPLE_RATE as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_ms > self.hop_ms && self.hop_ms > 0.0) {
            return Err(Error::Config("log-mel window must exceed hop > 0".into()));
        }
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if self.fft_size < self.window_samples() {
            return Err(Error::Config(format!(
                "fft_size {} shorter than window of {} samples",
                self.fft_size,
                self.window_samples()
            )));
        }
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= SAMPLE_RATE as f64 / 2.0) {
            return Err(Error::Config("mel range must satisfy 0 <= fmin < fmax <= 8000".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModSpecConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_gammatone: usize,
    pub gt_cf_lo: f64,
    pub gt_cf_hi: f64,
    pub n_modfilters: usize,
    pub mod_cf_lo: f64,
    pub mod_cf_hi: f64,
    pub mod_q: f64,
    /// Envelopes are box-averaged by this factor before modulation filtering.
    pub envelope_decimation: usize,
}

impl Default for ModSpecConfig {
    fn default() -> Self {
        Self {
            window_ms: 256.0,
            hop_ms: 64.0,
            n_gammatone: 23,
            gt_cf_lo: 125.0,
            gt_cf_hi: 8000.0,
            n_modfilters: 8,
            mod_cf_lo: 2.0,
            mod_cf_hi: 64.0,
            mod_q: 2.0,
            envelope_decimation: 16,
        }
    }
}

impl ModSpecConfig {
    pub fn hop_samples(&self) -> usize {
        ms_to_samples(self.hop_ms, SAMPLE_RATE as f64)
    }

    pub fn envelope_rate(&self) -> f64 {
        SAMPLE_RATE as f64 / self.envelope_decimation as f64
    }

    pub fn n_features(&self) -> usize {
        self.n_gammatone * self.n_modfilters
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_gammatone == 0 || self.n_modfilters == 0 {
            return Err(Error::Config("filter counts must be at least 1".into()));
        }
        if !(self.window_ms > self.hop_ms && self.hop_ms > 0.0) {
            return Err(Error::Config("modulation window must exceed hop > 0".into()));
        }
        if !(0.0 < self.gt_cf_lo && self.gt_cf_lo < self.gt_cf_hi && self.gt_cf_hi <= 8000.0)
            && self.n_gammatone > 1
        {
            return Err(Error::Config("gammatone centers must increase within (0, 8000]".into()));
        }
        if !(0.0 < self.mod_cf_lo && self.mod_cf_lo < self.mod_cf_hi) && self.n_modfilters > 1 {
            return Err(Error::Config("modulation centers must increase".into()));
        }
        if self.mod_q <= 0.0 {
            return Err(Error::Config("modulation Q must be positive".into()));
        }
        if self.envelope_decimation == 0 {
            return Err(Error::Config("envelope decimation must be positive".into()));
        }
        let hop = self.hop_samples();
        if hop % self.envelope_decimation != 0 {
            return Err(Error::Config(format!(
                "hop of {hop} samples is not a multiple of the envelope decimation"
            )));
        }
        if self.mod_cf_hi >= self.envelope_rate() / 2.0 {
            return Err(Error::Config("modulation centers exceed envelope Nyquist".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_law() {
        assert_eq!(frame_count(7 * 16000, 160), 700);
        assert_eq!(frame_count(7 * 16000, 1024), 110);
        assert_eq!(frame_count(19360, 160), 121);
        assert_eq!(frame_count(1, 160), 1);
        assert_eq!(frame_count(160, 160), 1);
        assert_eq!(frame_count(161, 160), 2);
    }

    #[test]
    fn reflection() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-300, 1), 0);
        assert_eq!(reflect_index(5, 2), 1);
    }

    #[test]
    fn default_configs_validate() {
        LogMelConfig::default().validate().unwrap();
        ModSpecConfig::default().validate().unwrap();
        assert_eq!(LogMelConfig::default().window_samples(), 320);
        assert_eq!(ModSpecConfig::default().n_features(), 184);
        let bad = LogMelConfig {
            hop_ms: 30.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sequence_mask_must_be_prefix() {
        let ok = FeatureSequence::from_parts(
            FeatureKind::Logmel,
            1,
            2,
            vec![1.0, 2.0, 0.0],
            vec![true, true, false],
        );
        assert!(ok.is_ok());
        let bad = FeatureSequence::from_parts(
            FeatureKind::Logmel,
            1,
            2,
            vec![1.0, 0.0, 2.0],
            vec![true, false, true],
        );
        assert!(bad.is_err());
    }
}
