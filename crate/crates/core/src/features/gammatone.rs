use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::ModSpecConfig;
use crate::signal::{AudioClip, SAMPLE_RATE};

/// Equivalent rectangular bandwidth (Glasberg & Moore), Hz.
pub fn erb_bandwidth(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// ERB-number scale.
pub fn erb_rate(f: f64) -> f64 {
    21.4 * (4.37 * f / 1000.0 + 1.0).log10()
}

pub fn erb_rate_inv(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Centers uniformly spaced on the ERB-rate scale, endpoints inclusive.
pub fn gammatone_centers(cfg: &ModSpecConfig) -> Vec<f64> {
    let n = cfg.n_gammatone;
    if n == 1 {
        return vec![cfg.gt_cf_lo];
    }
    let (lo, hi) = (erb_rate(cfg.gt_cf_lo), erb_rate(cfg.gt_cf_hi));
    (0..n)
        .map(|i| {
            if i == n - 1 {
                cfg.gt_cf_hi
            } else {
                erb_rate_inv(lo + (hi - lo) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

const STAGES: usize = 4;

/// One all-pole resonator section: `b0 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy)]
struct Section {
    b0: f64,
    a1: f64,
    a2: f64,
}

impl Section {
    fn design(fc: f64, fs: f64) -> Self {
        let theta = 2.0 * PI * fc / fs;
        let r = (-2.0 * PI * 1.019 * erb_bandwidth(fc) / fs).exp();
        let a1 = -2.0 * r * theta.cos();
        let a2 = r * r;
        let z1 = Complex64::from_polar(1.0, -theta);
        let den = Complex64::new(1.0, 0.0) + z1 * a1 + z1 * z1 * a2;
        // Unit gain at the center frequency per section.
        Self {
            b0: den.norm(),
            a1,
            a2,
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut y1, mut y2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b0 * *v - self.a1 * y1 - self.a2 * y2;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
}

/// Fourth-order all-pole gammatone filterbank.
#[derive(Debug, Clone)]
pub struct GammatoneBank {
    centers: Vec<f64>,
    sections: Vec<Section>,
}

impl GammatoneBank {
    pub fn new(cfg: &ModSpecConfig) -> Self {
        let centers = gammatone_centers(cfg);
        let sections = centers
            .iter()
            .map(|&fc| Section::design(fc, SAMPLE_RATE as f64))
            .collect();
        Self { centers, sections }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Filters one signal through every band; each output has the input length.
    pub fn process(&self, x: &[f32]) -> Vec<Vec<f64>> {
        self.sections
            .iter()
            .map(|s| {
                let mut y: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                for _ in 0..STAGES {
                    s.run(&mut y);
                }
                y
            })
            .collect()
    }

    pub fn process_clip(&self, clip: &AudioClip) -> Vec<Vec<f64>> {
        self.process(clip.samples())
    }
}
