use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono 16 kHz audio with its corpus identity.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    pub clip_id: String,
    pub speaker_id: String,
}

impl AudioClip {
    /// Builds a clip, enforcing a nonempty, finite sample buffer.
    pub fn new(
        samples: Vec<f32>,
        clip_id: impl Into<String>,
        speaker_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("audio clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            clip_id: clip_id.into(),
            speaker_id: speaker_id.into(),
        })
    }

    /// Convenience constructor for synthesized signals with no corpus identity.
    pub fn anonymous(samples: Vec<f32>) -> Result<Self> {
        Self::new(samples, "", "")
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::Format(other.to_string()),
    }
}

/// Reads channel 0 of a PCM16 or float32 WAV file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    load_wav_channel(path, 0)
}

/// Reads one channel of a PCM16 or float32 WAV file. Integer samples are
/// scaled by 1/32768.
pub fn load_wav_channel(path: impl AsRef<Path>, channel: usize) -> Result<AudioClip> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound {
            what: "wav file",
            path: path.to_path_buf(),
        });
    }
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedRate(spec.sample_rate));
    }
    let channels = spec.channels as usize;
    if channel >= channels {
        return Err(Error::Format(format!(
            "channel {channel} requested from a {channels}-channel file"
        )));
    }
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .skip(channel)
            .step_by(channels)
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .skip(channel)
            .step_by(channels)
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "unsupported encoding {fmt:?} with {bits} bits per sample"
            )))
        }
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioClip::new(samples, stem, "")
}

/// Quantizes to PCM16 with rounding and clamping to the i16 range.
pub fn to_pcm16(x: f32) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes a mono PCM16 WAV file at 16 kHz.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in samples {
        writer
            .write_sample(to_pcm16(s))
            .map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}
