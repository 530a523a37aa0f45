use super::{stft, FeatureKind, FeatureSequence, LogMelConfig};
use crate::error::Result;
use crate::signal::{AudioClip, SAMPLE_RATE};

/// Power floor applied before the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

fn mel_edges(cfg: &LogMelConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let n = cfg.n_mels + 2;
    (0..n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Center frequency (Hz) of each triangular filter.
pub fn mel_band_centers(cfg: &LogMelConfig) -> Vec<f64> {
    let e = mel_edges(cfg);
    e[1..=cfg.n_mels].to_vec()
}

/// Peak-normalized triangular filters, `n_mels × (fft_size/2 + 1)` row-major.
pub fn mel_filterbank(cfg: &LogMelConfig) -> Vec<f64> {
    let bins = cfg.fft_size / 2 + 1;
    let edges = mel_edges(cfg);
    let bin_hz = SAMPLE_RATE as f64 / cfg.fft_size as f64;
    let mut fb = vec![0.0; cfg.n_mels * bins];
    for m in 0..cfg.n_mels {
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..bins {
            let f = k as f64 * bin_hz;
            let w = if f > l && f <= c {
                (f - l) / (c - l)
            } else if f > c && f < r {
                (r - f) / (r - c)
            } else {
                0.0
            };
            fb[m * bins + k] = w;
        }
    }
    fb
}

/// Log-mel spectrogram: `ln(max(mel · |X|², floor))`, `T × n_mels`.
pub fn logmel(clip: &AudioClip, cfg: &LogMelConfig) -> Result<FeatureSequence> {
    let spec = stft(clip, cfg)?;
    let fb = mel_filterbank(cfg);
    let bins = spec.bins;
    let mut values = Vec::with_capacity(spec.frames * cfg.n_mels);
    let mut power = vec![0.0; bins];
    for t in 0..spec.frames {
        for (p, c) in power.iter_mut().zip(spec.frame(t)) {
            *p = c.norm_sqr();
        }
        for m in 0..cfg.n_mels {
            let e: f64 = fb[m * bins..(m + 1) * bins]
                .iter()
                .zip(&power)
                .map(|(w, p)| w * p)
                .sum();
            values.push(e.max(LOG_FLOOR).ln() as f32);
        }
    }
    FeatureSequence::new(FeatureKind::Logmel, cfg.n_mels, values)
}
