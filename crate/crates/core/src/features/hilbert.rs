use rustfft::num_complex::Complex64;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

/// Analytic signal `x + j·H{x}` via the one-sided spectrum of the full-length DFT.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= gain / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Smallest `2^a · 3^b · 5^c` not below `n`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Envelope extractor for signals of one length, zero-padded to a fast FFT
/// size. Plans are built once and shared by every band of a clip.
pub struct HilbertPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl HilbertPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let m = fast_len(n);
        Self {
            n,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    /// `sqrt(x² + H{x}²)` for `x` of the planned length.
    pub fn envelope(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "signal length differs from the plan");
        if self.n == 0 {
            return Vec::new();
        }
        let m = self.fwd.len();
        let mut buf: Vec<Complex64> = x
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(m)
            .collect();
        self.fwd.process(&mut buf);
        let half = m / 2;
        for (k, c) in buf.iter_mut().enumerate() {
            let gain = if k == 0 || (m % 2 == 0 && k == half) {
                1.0
            } else if k <= (m - 1) / 2 {
                2.0
            } else {
                0.0
            };
            *c *= gain / m as f64;
        }
        self.inv.process(&mut buf);
        buf[..self.n].iter().map(|c| c.norm()).collect()
    }
}

/// Temporal envelope `sqrt(x² + H{x}²)`.
pub fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    HilbertPlan::new(x.len()).envelope(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn central(n: usize) -> std::ops::Range<usize> {
        n / 10..n - n / 10
    }

    #[test]
    fn tone_envelope_is_its_amplitude() {
        let x: Vec<f64> = (0..16000)
            .map(|i| 0.5 * (2.0 * PI * 100.0 * i as f64 / 16000.0).cos())
            .collect();
        let e = hilbert_envelope(&x);
        for i in central(x.len()) {
            assert!((e[i] - 0.5).abs() <= 0.005, "sample {i}: {}", e[i]);
        }
    }

    #[test]
    fn zero_signal() {
        assert!(hilbert_envelope(&[0.0; 64]).iter().all(|&v| v == 0.0));
        assert!(hilbert_envelope(&[]).is_empty());
    }

    #[test]
    fn analytic_real_part_is_input() {
        let x: Vec<f64> = (0..101).map(|i| ((i * 37 % 17) as f64 - 8.0) / 8.0).collect();
        let a = analytic_signal(&x);
        for (c, v) in a.iter().zip(&x) {
            assert!((c.re - v).abs() < 1e-12);
        }
        assert!(hilbert_envelope(&x).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(fast_len(16000), 16000);
        assert_eq!(fast_len(101), 108);
        assert_eq!(fast_len(1), 1);
        assert_eq!(fast_len(0), 1);
    }

    #[test]
    fn padded_envelope_of_awkward_length() {
        let n = 16001;
        let x: Vec<f64> = (0..n)
            .map(|i| 0.3 * (2.0 * PI * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        let e = hilbert_envelope(&x);
        assert_eq!(e.len(), n);
        for i in central(n) {
            assert!((e[i] - 0.3).abs() <= 0.003, "sample {i}: {}", e[i]);
        }
    }

    #[test]
    fn am_envelope_tracks_modulator() {
        let n = 16000;
        let t = |i: usize| i as f64 / 16000.0;
        let m: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (2.0 * PI * 4.0 * t(i)).cos()).collect();
        let x: Vec<f64> = (0..n)
            .map(|i| m[i] * (2.0 * PI * 1000.0 * t(i)).cos())
            .collect();
        let e = hilbert_envelope(&x);
        let r = central(n);
        let (a, b) = (&e[r.clone()], &m[r]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!(cov / (va * vb).sqrt() > 0.99);
    }
}
