//! Synthetic three-class corpus whose classes differ in syllabic rate,
//! modulation depth, pausing and spectral tilt.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSequence};
use crate::harness::derive_seed;
use crate::signal::{write_wav, CorpusManifest, IntelligibilityClass, ManifestEntry, SAMPLE_RATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: IntelligibilityClass,
    /// Mean syllabic rate in Hz.
    pub rate_hz: f64,
    /// Envelope modulation depth in [0, 1].
    pub depth: f64,
    /// Probability that a syllable is replaced by a pause.
    pub pause_prob: f64,
    /// Spectral slope above 500 Hz in dB per octave.
    pub tilt_db_per_octave: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub clips_per_speaker: usize,
    pub min_duration: f64,
    pub max_duration: f64,
    pub profiles: Vec<ClassProfile>,
    /// Peak amplitude of the additive uniform noise, relative to full scale.
    pub noise_floor: f64,
    /// Relative half-width of the per-speaker rate offset.
    pub speaker_rate_spread: f64,
    /// Relative half-width of the per-clip rate jitter.
    pub clip_rate_jitter: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let p = |class, rate_hz, depth, pause_prob, tilt_db_per_octave| ClassProfile {
            class,
            rate_hz,
            depth,
            pause_prob,
            tilt_db_per_octave,
        };
        Self {
            n_speakers: 15,
            clips_per_speaker: 40,
            min_duration: 1.0,
            max_duration: 7.0,
            profiles: vec![
                p(IntelligibilityClass::High, 4.0, 0.9, 0.0, 0.0),
                p(IntelligibilityClass::Medium, 2.5, 0.7, 0.10, 0.0),
                p(IntelligibilityClass::Low, 1.5, 0.5, 0.25, -6.0),
            ],
            noise_floor: 0.003,
            speaker_rate_spread: 0.08,
            clip_rate_jitter: 0.05,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers == 0 || self.clips_per_speaker == 0 {
            return Err(Error::Config("speaker and clip counts must be positive".into()));
        }
        if !(0.0 < self.min_duration && self.min_duration <= self.max_duration) {
            return Err(Error::Config(format!(
                "invalid duration range [{}, {}]",
                self.min_duration, self.max_duration
            )));
        }
        if self.profiles.is_empty() {
            return Err(Error::Config("at least one class profile is required".into()));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            if !(p.rate_hz > 0.0) {
                return Err(Error::Config(format!("class {} has non-positive rate", p.class)));
            }
            if !(0.0..=1.0).contains(&p.depth) || !(0.0..1.0).contains(&p.pause_prob) {
                return Err(Error::Config(format!("class {} depth or pause probability out of range", p.class)));
            }
            if self.profiles[..i].iter().any(|q| q.class == p.class) {
                return Err(Error::Config(format!("class {} has two profiles", p.class)));
            }
        }
        if !(0.0..0.5).contains(&self.noise_floor) {
            return Err(Error::Config("noise floor must be in [0, 0.5)".into()));
        }
        if !(0.0..0.5).contains(&self.speaker_rate_spread) || !(0.0..0.5).contains(&self.clip_rate_jitter) {
            return Err(Error::Config("rate spreads must be in [0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn n_clips(&self) -> usize {
        self.n_speakers * self.clips_per_speaker
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Speaker-level voice parameters.
#[derive(Debug, Clone, PartialEq)]
struct Voice {
    f0: f64,
    formants: [f64; 3],
    rate_factor: f64,
    level: f64,
}

impl Voice {
    fn draw(rng: &mut ChaCha8Rng, spread: f64) -> Self {
        Self {
            f0: rng.gen_range(190.0..300.0),
            formants: [
                rng.gen_range(450.0..800.0),
                rng.gen_range(1100.0..2000.0),
                rng.gen_range(2300.0..3200.0),
            ],
            rate_factor: 1.0 + rng.gen_range(-spread..=spread),
            level: rng.gen_range(0.5..0.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub clip_id: String,
    pub speaker_id: String,
    pub class: IntelligibilityClass,
    pub score: u8,
    /// Syllabic rate actually used, in Hz.
    pub rate_hz: f64,
    pub samples: Vec<f32>,
}

impl SynthClip {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn relative_path(&self) -> PathBuf {
        PathBuf::from(&self.speaker_id).join(format!("{}.wav", self.clip_id))
    }
}

pub fn speaker_id(s: usize) -> String {
    format!("spk{s:02}")
}

const TABLE: usize = 4096;

/// One period of the harmonic carrier, shaped by three formant resonances
/// and the class tilt, peak-normalized.
fn carrier_table(voice: &Voice, tilt_db: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let nyq = 0.45 * SAMPLE_RATE as f64;
    let n_harm = (nyq / voice.f0).floor() as usize;
    let mut table = vec![0.0; TABLE];
    for h in 1..=n_harm {
        let f = h as f64 * voice.f0;
        let formant: f64 = voice
            .formants
            .iter()
            .map(|&fc| {
                let bw = 0.1 * fc + 60.0;
                1.0 / (1.0 + ((f - fc) / bw).powi(2))
            })
            .sum::<f64>()
            + 0.02;
        let tilt = 10f64.powf(tilt_db * (f / 500.0).log2().max(0.0) / 20.0);
        let amp = formant * tilt;
        let phase = rng.gen_range(0.0..2.0 * PI);
        for (j, t) in table.iter_mut().enumerate() {
            *t += amp * (2.0 * PI * h as f64 * j as f64 / TABLE as f64 + phase).sin();
        }
    }
    let peak = table.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    table.iter_mut().for_each(|v| *v /= peak);
    table
}

/// Raised-cosine syllable envelope in `[1 - depth, 1]` with pauses: a paused
/// syllable is faded to a small floor over its first quarter.
fn syllable_envelope(n: usize, rate: f64, depth: f64, pause_prob: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let phase0 = rng.gen_range(0.0..1.0);
    let n_syll = (n as f64 * rate / fs + phase0).ceil() as usize + 1;
    let gains: Vec<f64> = (0..=n_syll)
        .map(|_| if rng.gen_bool(pause_prob) { 0.05 } else { 1.0 })
        .collect();
    (0..n)
        .map(|i| {
            let pos = i as f64 * rate / fs + phase0;
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let prev = if k == 0 { gains[0] } else { gains[k - 1] };
            let g = if frac < 0.25 {
                let w = 0.5 - 0.5 * (PI * frac / 0.25).cos();
                prev + (gains[k] - prev) * w
            } else {
                gains[k]
            };
            let shape = 1.0 - depth * (0.5 + 0.5 * (2.0 * PI * pos).cos());
            g * shape
        })
        .collect()
}

fn class_of(spec: &SynthSpec, clip: usize) -> &ClassProfile {
    &spec.profiles[clip % spec.profiles.len()]
}

fn score_for(class: IntelligibilityClass, rng: &mut ChaCha8Rng) -> u8 {
    match class {
        IntelligibilityClass::Low => rng.gen_range(0..=33),
        IntelligibilityClass::Medium => rng.gen_range(34..=66),
        IntelligibilityClass::High => rng.gen_range(67..=100),
    }
}

/// Deterministic function of (spec, speaker, clip index).
pub fn generate_clip(spec: &SynthSpec, speaker: usize, clip: usize) -> SynthClip {
    let mut vrng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[speaker as u64, u64::MAX]));
    let voice = Voice::draw(&mut vrng, spec.speaker_rate_spread);
    let profile = class_of(spec, clip);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[speaker as u64, clip as u64]));
    let secs = if spec.max_duration > spec.min_duration {
        rng.gen_range(spec.min_duration..=spec.max_duration)
    } else {
        spec.min_duration
    };
    let n = ((secs * SAMPLE_RATE as f64).round() as usize).max(1);
    let rate = profile.rate_hz
        * voice.rate_factor
        * (1.0 + rng.gen_range(-spec.clip_rate_jitter..=spec.clip_rate_jitter));
    let table = carrier_table(&voice, profile.tilt_db_per_octave, &mut rng);
    let env = syllable_envelope(n, rate, profile.depth, profile.pause_prob, &mut rng);
    let step = voice.f0 * TABLE as f64 / SAMPLE_RATE as f64;
    let scale = voice.level * (1.0 - spec.noise_floor);
    let samples = env
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let p = (i as f64 * step) % TABLE as f64;
            let j = p.floor() as usize;
            let frac = p - j as f64;
            let c = table[j] * (1.0 - frac) + table[(j + 1) % TABLE] * frac;
            let noise = if spec.noise_floor > 0.0 {
                rng.gen_range(-spec.noise_floor..=spec.noise_floor)
            } else {
                0.0
            };
            (scale * e * c + noise).clamp(-1.0, 1.0) as f32
        })
        .collect();
    let speaker_id = speaker_id(speaker);
    SynthClip {
        clip_id: format!("{speaker_id}_c{clip:03}"),
        speaker_id,
        class: profile.class,
        score: score_for(profile.class, &mut rng),
        rate_hz: rate,
        samples,
    }
}

/// All clips, speaker-major.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthClip>> {
    spec.validate()?;
    Ok((0..spec.n_clips())
        .into_par_iter()
        .map(|i| generate_clip(spec, i / spec.clips_per_speaker, i % spec.clips_per_speaker))
        .collect())
}

pub fn manifest_for(clips: &[SynthClip], root: impl Into<PathBuf>) -> CorpusManifest {
    CorpusManifest {
        entries: clips
            .iter()
            .map(|c| ManifestEntry {
                path: c.relative_path(),
                clip_id: c.clip_id.clone(),
                speaker_id: c.speaker_id.clone(),
                score: c.score,
                class: c.class,
            })
            .collect(),
        root: root.into(),
    }
}

pub const MANIFEST_NAME: &str = "manifest.tsv";

/// Writes `<out>/<speaker>/<clip>.wav` and `<out>/manifest.tsv`.
pub fn write_corpus(spec: &SynthSpec, out: &Path) -> Result<CorpusManifest> {
    let clips = generate(spec)?;
    let io = |path: &Path, e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    for s in 0..spec.n_speakers {
        let dir = out.join(speaker_id(s));
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    }
    clips
        .par_iter()
        .try_for_each(|c| write_wav(out.join(c.relative_path()), &c.samples))?;
    let manifest = manifest_for(&clips, out);
    let path = out.join(MANIFEST_NAME);
    fs::write(&path, manifest.to_tsv()).map_err(|e| io(&path, e))?;
    Ok(manifest)
}

/// Energy in modulation filters centered below 4 Hz over energy in those
/// centered above, summed over all frames and acoustic bands.
pub fn lhmr(seq: &FeatureSequence, centers: &[f64]) -> Result<f64> {
    if seq.kind() != FeatureKind::Modulation {
        return Err(Error::Shape("LHMR needs a modulation spectrogram".into()));
    }
    let m = centers.len();
    if m == 0 || seq.n_features() % m != 0 {
        return Err(Error::Shape(format!(
            "{} features do not split into {m} modulation bands",
            seq.n_features()
        )));
    }
    if seq.valid_frames() == 0 {
        return Err(Error::InsufficientFrames { needed: 1, got: 0 });
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for (i, &v) in seq.valid_values().iter().enumerate() {
        let fc = centers[i % m];
        if fc < 4.0 {
            lo += v as f64;
        } else if fc > 4.0 {
            hi += v as f64;
        }
    }
    if hi <= 0.0 {
        return Err(Error::Degenerate("no modulation energy above 4 Hz".into()));
    }
    Ok(lo / hi)
}
