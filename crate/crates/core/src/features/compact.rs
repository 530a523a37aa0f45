use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::FeatureSequence;
use crate::error::{Error, Result};

pub const MFCC_COEFFS: usize = 13;

/// Orthonormal DCT-II computed through a 2N-point FFT of the mirrored input.
pub fn dct_ii_orthonormal(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x
        .iter()
        .chain(x.iter().rev())
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    (0..n)
        .map(|k| {
            let phase = Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2 * n) as f64);
            let raw = 0.5 * (phase * buf[k]).re;
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            raw * scale
        })
        .collect()
}

/// Utterance mean of 13 MFCCs followed by the mean of their frame-to-frame
/// differences (26 values).
pub fn avg_mfcc(seq: &FeatureSequence) -> Result<Vec<f64>> {
    let t = seq.valid_frames();
    if t < 3 {
        return Err(Error::InsufficientFrames { needed: 3, got: t });
    }
    if seq.n_features() < MFCC_COEFFS {
        return Err(Error::Shape(format!(
            "need at least {MFCC_COEFFS} mel bands, got {}",
            seq.n_features()
        )));
    }
    let ceps: Vec<Vec<f64>> = (0..t)
        .map(|i| {
            let frame: Vec<f64> = seq.row(i).iter().map(|&v| v as f64).collect();
            let mut c = dct_ii_orthonormal(&frame);
            c.truncate(MFCC_COEFFS);
            c
        })
        .collect();
    let mut out = vec![0.0; 2 * MFCC_COEFFS];
    for c in &ceps {
        for (o, v) in out[..MFCC_COEFFS].iter_mut().zip(c) {
            *o += v / t as f64;
        }
    }
    for w in ceps.windows(2) {
        for k in 0..MFCC_COEFFS {
            out[MFCC_COEFFS + k] += (w[1][k] - w[0][k]) / (t - 1) as f64;
        }
    }
    Ok(out)
}

/// Mean over frames of the modulation energies.
pub fn avg_modspec(seq: &FeatureSequence) -> Result<Vec<f64>> {
    let t = seq.valid_frames();
    if t == 0 {
        return Err(Error::InsufficientFrames { needed: 1, got: 0 });
    }
    let d = seq.n_features();
    let mut out = vec![0.0; d];
    for i in 0..t {
        for (o, &v) in out.iter_mut().zip(seq.row(i)) {
            *o += v as f64;
        }
    }
    out.iter_mut().for_each(|o| *o /= t as f64);
    Ok(out)
}
