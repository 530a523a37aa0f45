use serde::Serialize;

use super::FeatureSequence;
use crate::error::{Error, Result};
use crate::signal::IntelligibilityClass;

/// Modulation energies scaled so the utterance's mean per-frame total is 1.
pub fn relative_energy(seq: &FeatureSequence) -> Vec<f64> {
    let vals = seq.valid_values();
    let t = seq.valid_frames().max(1) as f64;
    let total: f64 = vals.iter().map(|&v| v as f64).sum();
    if total <= 0.0 {
        return vec![0.0; vals.len()];
    }
    vals.iter().map(|&v| v as f64 * t / total).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BandEnergyProfile {
    /// Per class (low, medium, high): mean fraction of utterance modulation
    /// energy per modulation band; `None` when the class is absent.
    pub class_means: Vec<Option<Vec<f64>>>,
    /// Per class: `(mean_c - mean_high) / mean_high` per band.
    pub increments: Vec<Option<Vec<f64>>>,
}

fn check_classes(labels: &[IntelligibilityClass], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} sequences but {} labels", labels.len())));
    }
    let mut present = [false; 3];
    labels.iter().for_each(|c| present[c.index()] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Degenerate("need at least two classes".into()));
    }
    Ok(())
}

/// Band fractions for one utterance: acoustic bands summed per modulation
/// band, normalized by the utterance's total modulation energy.
fn band_fractions(seq: &FeatureSequence, n_mod: usize) -> Vec<f64> {
    let mut bands = vec![0.0; n_mod];
    for (i, &v) in seq.valid_values().iter().enumerate() {
        bands[(i % seq.n_features()) % n_mod] += v as f64;
    }
    let total: f64 = bands.iter().sum();
    if total > 0.0 {
        bands.iter_mut().for_each(|b| *b /= total);
    }
    bands
}

pub fn band_energy_profile(
    seqs: &[FeatureSequence],
    labels: &[IntelligibilityClass],
    n_mod: usize,
) -> Result<BandEnergyProfile> {
    check_classes(labels, seqs.len())?;
    let mut sums = vec![vec![0.0; n_mod]; 3];
    let mut counts = [0usize; 3];
    for (seq, c) in seqs.iter().zip(labels) {
        let f = band_fractions(seq, n_mod);
        counts[c.index()] += 1;
        for (s, v) in sums[c.index()].iter_mut().zip(f) {
            *s += v;
        }
    }
    let class_means: Vec<Option<Vec<f64>>> = (0..3)
        .map(|c| (counts[c] > 0).then(|| sums[c].iter().map(|s| s / counts[c] as f64).collect()))
        .collect();
    let high = class_means[IntelligibilityClass::High.index()]
        .clone()
        .ok_or_else(|| Error::Degenerate("high-intelligibility class absent".into()))?;
    let increments = class_means
        .iter()
        .map(|m| {
            m.as_ref().map(|m| {
                m.iter()
                    .zip(&high)
                    .map(|(v, h)| if *h > 0.0 { (v - h) / h } else { 0.0 })
                    .collect()
            })
        })
        .collect();
    Ok(BandEnergyProfile {
        class_means,
        increments,
    })
}

/// Pearson correlation between each cell's per-frame relative energy and the
/// numeric class level (low = 0, medium = 1, high = 2), pooled over all frames.
/// Cells with zero variance get 0.
pub fn corr_map(seqs: &[FeatureSequence], labels: &[IntelligibilityClass]) -> Result<Vec<f64>> {
    check_classes(labels, seqs.len())?;
    let d = seqs.first().map(|s| s.n_features()).unwrap_or(0);
    if seqs.iter().any(|s| s.n_features() != d) {
        return Err(Error::Shape("sequences differ in feature width".into()));
    }
    let mut n = 0.0;
    let (mut sl, mut sll) = (0.0, 0.0);
    let mut sx = vec![0.0; d];
    let mut sxx = vec![0.0; d];
    let mut sxl = vec![0.0; d];
    for (seq, c) in seqs.iter().zip(labels) {
        let level = c.index() as f64;
        for frame in relative_energy(seq).chunks(d) {
            n += 1.0;
            sl += level;
            sll += level * level;
            for j in 0..d {
                let x = frame[j];
                sx[j] += x;
                sxx[j] += x * x;
                sxl[j] += x * level;
            }
        }
    }
    let var_l = sll / n - (sl / n).powi(2);
    Ok((0..d)
        .map(|j| {
            let var_x = sxx[j] / n - (sx[j] / n).powi(2);
            let cov = sxl[j] / n - (sx[j] / n) * (sl / n);
            let denom = (var_x * var_l).sqrt();
            if !(denom > 1e-15) || var_x <= 1e-12 * (sxx[j] / n).max(1e-300) {
                0.0
            } else {
                (cov / denom).clamp(-1.0, 1.0)
            }
        })
        .collect())
}
