use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{frame_count, reflect_index, LogMelConfig};
use crate::error::Result;
use crate::signal::AudioClip;

/// Periodic Hamming window.
pub fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Complex short-time spectrum, `frames × bins`, row-major.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Centered STFT: frame `t` is the window centered on sample `t * hop`,
/// zero-padded to `fft_size`, with reflection at the signal edges.
pub fn stft(clip: &AudioClip, cfg: &LogMelConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let x = clip.samples();
    let win_len = cfg.window_samples();
    let hop = cfg.hop_samples();
    let n_fft = cfg.fft_size;
    let window = hamming(win_len);
    let frames = frame_count(x.len(), hop);
    let bins = n_fft / 2 + 1;

    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex64::default(); n_fft];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(frames * bins);
    // Window occupies the middle of the FFT frame.
    let offset = (n_fft - win_len) / 2;
    for t in 0..frames {
        let start = (t * hop) as isize - (n_fft / 2) as isize + offset as isize;
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for (n, w) in window.iter().enumerate() {
            let s = x[reflect_index(start + n as isize, x.len())] as f64;
            buf[offset + n] = Complex64::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(Spectrogram { frames, bins, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, secs: f64) -> AudioClip {
        let n = (secs * 16000.0) as usize;
        AudioClip::anonymous(
            (0..n)
                .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin()) as f32)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn seven_seconds_is_700_frames() {
        let clip = AudioClip::anonymous(vec![0.0; 7 * 16000]).unwrap();
        let s = stft(&clip, &LogMelConfig::default()).unwrap();
        assert_eq!(s.frames, 700);
        assert_eq!(s.bins, 257);
        assert!(s.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn sub_hop_clip_yields_one_frame() {
        let clip = AudioClip::anonymous(vec![0.1; 50]).unwrap();
        assert_eq!(stft(&clip, &LogMelConfig::default()).unwrap().frames, 1);
        let one = AudioClip::anonymous(vec![0.3]).unwrap();
        assert_eq!(stft(&one, &LogMelConfig::default()).unwrap().frames, 1);
    }

    #[test]
    fn matches_direct_dft() {
        let clip = tone(1000.0, 0.2);
        let cfg = LogMelConfig::default();
        let s = stft(&clip, &cfg).unwrap();
        let x = clip.samples();
        let w = hamming(320);
        for &t in &[0usize, 7, 19] {
            // Independent frame assembly: samples t*160-160 .. t*160+160, mirrored.
            let frame: Vec<f64> = (0..320)
                .map(|n| {
                    let mut i = (t * 160) as isize - 160 + n as isize;
                    if i < 0 {
                        i = -i;
                    }
                    if i >= x.len() as isize {
                        i = 2 * (x.len() as isize - 1) - i;
                    }
                    x[i as usize] as f64 * w[n]
                })
                .collect();
            for k in 0..257 {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, v) in frame.iter().enumerate() {
                    let ang = -2.0 * PI * k as f64 * (n + 96) as f64 / 512.0;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                let mag = (re * re + im * im).sqrt();
                let got = s.frame(t)[k].norm();
                let tol = 1e-6 * mag.max(1e-3);
                assert!((got - mag).abs() <= tol, "t={t} k={k}: {got} vs {mag}");
            }
        }
    }
}
