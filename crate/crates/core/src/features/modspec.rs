use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::{
    frame_count, hamming, HilbertPlan, ms_to_samples, reflect_index, FeatureKind,
    FeatureSequence, GammatoneBank, ModSpecConfig,
};
use crate::error::Result;
use crate::signal::AudioClip;

/// Modulation filter centers, geometrically spaced between the endpoints.
pub fn modulation_centers(cfg: &ModSpecConfig) -> Vec<f64> {
    let n = cfg.n_modfilters;
    if n == 1 {
        return vec![cfg.mod_cf_lo];
    }
    let ratio = cfg.mod_cf_hi / cfg.mod_cf_lo;
    (0..n)
        .map(|j| cfg.mod_cf_lo * ratio.powf(j as f64 / (n - 1) as f64))
        .collect()
}

/// Second-order band-pass resonator `(s/Qω₀) / (s²/ω₀² + s/Qω₀ + 1)`,
/// discretized with the bilinear transform prewarped at the center.
/// Unit gain at the center, zero gain at DC and Nyquist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationFilter {
    b0: f64,
    a1: f64,
    a2: f64,
}

impl ModulationFilter {
    pub fn new(fc: f64, q: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let norm = 1.0 + k / q + k * k;
        Self {
            b0: k / q / norm,
            a1: 2.0 * (k * k - 1.0) / norm,
            a2: (1.0 - k / q + k * k) / norm,
        }
    }

    /// Squared magnitude response at `f` Hz.
    pub fn power_response(&self, f: f64, fs: f64) -> f64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let num = (Complex64::new(1.0, 0.0) - z1 * z1) * self.b0;
        let den = Complex64::new(1.0, 0.0) + z1 * self.a1 + z1 * z1 * self.a2;
        (num / den).norm_sqr()
    }

    /// Filters `x`. The input is offset by its first sample, which starts the
    /// filter in the steady state of a constant signal (the DC gain is zero).
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let x0 = x.first().copied().unwrap_or(0.0);
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for (o, &v) in out.iter_mut().zip(x) {
            let v = v - x0;
            let y = self.b0 * (v - x2) - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = v;
            y2 = y1;
            y1 = y;
            *o = y;
        }
    }
}

fn box_decimate(x: &[f64], factor: usize) -> Vec<f64> {
    x.chunks(factor)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Modulation spectrogram, `T × (n_gammatone · n_modfilters)`, acoustic-band major.
///
/// Each gammatone band's Hilbert envelope is decimated, passed through the
/// modulation resonators, and each cell is the Hamming-weighted mean power of
/// the resonator output over a centered window.
pub fn modspec(clip: &AudioClip, cfg: &ModSpecConfig) -> Result<FeatureSequence> {
    cfg.validate()?;
    let bank = GammatoneBank::new(cfg);
    modspec_with_bank(clip, cfg, &bank)
}

/// As [`modspec`] with a prebuilt filterbank.
pub fn modspec_with_bank(
    clip: &AudioClip,
    cfg: &ModSpecConfig,
    bank: &GammatoneBank,
) -> Result<FeatureSequence> {
    cfg.validate()?;
    let frames = frame_count(clip.len(), cfg.hop_samples());
    let hop = cfg.hop_samples() / cfg.envelope_decimation;
    let fs = cfg.envelope_rate();
    let win_len = ms_to_samples(cfg.window_ms, fs);
    let window = hamming(win_len);
    let win_sum: f64 = window.iter().sum();
    let filters: Vec<ModulationFilter> = modulation_centers(cfg)
        .into_iter()
        .map(|fc| ModulationFilter::new(fc, cfg.mod_q, fs))
        .collect();
    let n_mod = filters.len();
    let n_feat = bank.len() * n_mod;
    // Reflected lead-in covering three time constants of the slowest resonator.
    let lead = (3.0 * cfg.mod_q * fs / (PI * cfg.mod_cf_lo)).ceil() as usize;
    let mut values = vec![0.0f32; frames * n_feat];

    let hilbert = HilbertPlan::new(clip.len());
    for (k, band) in bank.process_clip(clip).into_iter().enumerate() {
        let env = box_decimate(&hilbert.envelope(&band), cfg.envelope_decimation);
        let pad = lead.min(env.len() - 1);
        let padded: Vec<f64> = (0..pad + env.len())
            .map(|n| env[reflect_index(n as isize - pad as isize, env.len())])
            .collect();
        let mut full = vec![0.0; padded.len()];
        for (j, filter) in filters.iter().enumerate() {
            filter.apply(&padded, &mut full);
            let y: Vec<f64> = full[pad..].iter().map(|v| v * v).collect();
            for t in 0..frames {
                let start = (t * hop) as isize - (win_len / 2) as isize;
                let e: f64 = window
                    .iter()
                    .enumerate()
                    .map(|(n, w)| w * y[reflect_index(start + n as isize, y.len())])
                    .sum();
                values[t * n_feat + k * n_mod + j] = (e / win_sum) as f32;
            }
        }
    }
    FeatureSequence::new(FeatureKind::Modulation, n_feat, values)
}
