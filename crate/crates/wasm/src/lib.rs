//! WebAssembly bindings for the static demo page in `www/`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use intelkit::features::{gammatone_centers, modulation_centers, relative_energy, FeatureExtractor, FeatureKind};
use intelkit::models::{Model, ModelConfig, ModelKind};
use intelkit::nn::{pool, AttentionMode, ParamStore, Pooling, PoolingScheme};
use intelkit::signal::{AudioClip, IntelligibilityClass};
use intelkit::synth::{generate_clip, lhmr, SynthSpec};
use intelkit::Result;

const WAVE_POINTS: usize = 600;

fn js(e: intelkit::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Parameter counts and W×L complexity of an architecture.
pub fn params_value(arch: &str) -> Result<Value> {
    let kind: ModelKind = arch.parse()?;
    let cfg = ModelConfig::new(kind);
    let model = Model::<f32>::new(cfg.clone(), 0)?;
    let branches: Vec<Value> = kind
        .branches()
        .iter()
        .map(|&k| {
            let b = cfg.branch(k);
            json!({
                "kind": k.name(),
                "frames": b.len,
                "features": b.n_features,
                "lstm": b.lstm_params(),
                "complexity": b.complexity(),
            })
        })
        .collect();
    Ok(json!({
        "arch": kind.name(),
        "lstm": model.lstm_param_count(),
        "total": model.count_params(),
        "branches": branches,
        "complexity_ratio": cfg.modspec.complexity() as f64 / cfg.logmel.complexity() as f64,
    }))
}

#[wasm_bindgen]
pub fn params(arch: &str) -> std::result::Result<String, JsError> {
    params_value(arch).map(|v| v.to_string()).map_err(js)
}

/// Synthesizes one clip and summarizes its modulation spectrogram.
pub fn synth_value(class: &str, speaker: usize, variant: usize, duration: f64) -> Result<Value> {
    let class: IntelligibilityClass = class.parse()?;
    let spec = SynthSpec {
        min_duration: duration,
        max_duration: duration,
        ..SynthSpec::default()
    };
    spec.validate()?;
    let offset = spec
        .profiles
        .iter()
        .position(|p| p.class == class)
        .expect("default spec covers every class");
    let clip = generate_clip(&spec, speaker, offset + spec.profiles.len() * variant);
    let ex = FeatureExtractor::default();
    let audio = AudioClip::anonymous(clip.samples.clone())?;
    let seq = ex.extract(&audio, FeatureKind::Modulation)?;
    let mods = modulation_centers(&ex.modspec);
    let m = mods.len();
    let rel = relative_energy(&seq);
    let mut cells = vec![0.0; seq.n_features()];
    for frame in rel.chunks(seq.n_features()) {
        cells.iter_mut().zip(frame).for_each(|(c, v)| *c += v);
    }
    let frames = seq.rows().max(1) as f64;
    let energy: Vec<Vec<f64>> = cells.chunks(m).map(|r| r.iter().map(|v| v / frames).collect()).collect();
    let ratio = match lhmr(&seq, &mods) {
        Ok(v) => json!(v),
        Err(intelkit::Error::Degenerate(_)) => json!("inf"),
        Err(e) => return Err(e),
    };
    let chunk = clip.samples.len().div_ceil(WAVE_POINTS).max(1);
    let wave: Vec<f32> = clip
        .samples
        .chunks(chunk)
        .map(|c| c.iter().fold(0.0f32, |a, &v| a.max(v.abs())))
        .collect();
    Ok(json!({
        "clip_id": clip.clip_id,
        "class": clip.class.to_string(),
        "rate_hz": clip.rate_hz,
        "duration": clip.duration_secs(),
        "lhmr": ratio,
        "mod_centers_hz": mods,
        "band_centers_hz": gammatone_centers(&ex.modspec),
        "energy": energy,
        "waveform": wave,
    }))
}

#[wasm_bindgen]
pub fn synth(class: &str, speaker: u32, variant: u32, duration: f64) -> std::result::Result<String, JsError> {
    synth_value(class, speaker as usize, variant as usize, duration)
        .map(|v| v.to_string())
        .map_err(js)
}

/// Pooling weights of a scalar sequence under each scheme. The last `masked`
/// frames are treated as padding.
pub fn pooling_value(frames: &[f64], masked: usize, u: f64, literal: bool) -> Result<Value> {
    let len = frames.len();
    let valid = len.saturating_sub(masked);
    let mask: Vec<bool> = (0..len).map(|t| t < valid).collect();
    let mode = if literal {
        AttentionMode::LiteralDoubleSoftmax
    } else {
        AttentionMode::SingleSoftmax
    };
    let mut out = serde_json::Map::new();
    for scheme in [PoolingScheme::Last, PoolingScheme::Mean, PoolingScheme::Attention] {
        let mut store = ParamStore::<f64>::new();
        let layer = Pooling::new(&mut store, "demo", scheme, mode, 1, len);
        if let Some(id) = layer.u {
            store.value_mut(id)[0] = u;
        }
        let (z, w) = pool(frames, &mask, 1, len, &layer, &store)?;
        out.insert(scheme.to_string(), json!({ "weights": w, "pooled": z.data[0] }));
    }
    Ok(Value::Object(out))
}

#[wasm_bindgen]
pub fn pooling(frames: &[f64], masked: u32, u: f64, literal: bool) -> std::result::Result<String, JsError> {
    pooling_value(frames, masked as usize, u, literal)
        .map(|v| v.to_string())
        .map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts() {
        let v = params_value("wp-fusion").unwrap();
        assert_eq!(v["lstm"], 67072);
        assert_eq!(v["branches"].as_array().unwrap().len(), 2);
        assert!(params_value("nope").is_err());
    }

    #[test]
    fn low_clip_has_higher_lhmr() {
        let low = synth_value("low", 0, 0, 3.0).unwrap();
        let high = synth_value("high", 0, 0, 3.0).unwrap();
        assert_eq!(low["class"], "low");
        assert_eq!(low["energy"].as_array().unwrap().len(), 23);
        assert!(low["waveform"].as_array().unwrap().len() <= WAVE_POINTS);
        assert!(low["lhmr"].as_f64().unwrap() > high["lhmr"].as_f64().unwrap());
    }

    #[test]
    fn pooling_weights_respect_padding() {
        let v = pooling_value(&[1.0, 3.0, 2.0, 9.0], 1, 1.5, false).unwrap();
        let att: Vec<f64> = serde_json::from_value(v["attention"]["weights"].clone()).unwrap();
        assert_eq!(att[3], 0.0);
        assert!((att.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(att[1] > att[2] && att[2] > att[0]);
        assert_eq!(v["last"]["pooled"], 2.0);
        assert!((v["mean"]["pooled"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert!(pooling_value(&[1.0], 1, 0.0, false).is_err());
    }
}
