use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use intelkit::features::{
    hilbert_envelope, modulation_centers, normalize_utterance, pad_or_cut, corr_map, FeatureExtractor,
    FeatureKind, FeatureSequence,
};
use intelkit::harness::{run_cv, train, train_accuracy, CvOptions, Dataset, Example, TrainConfig};
use intelkit::models::toy::{model_gradcheck, pooling_variants, toy_batch, toy_config};
use intelkit::models::{Batch, Model, ModelConfig, ModelKind};
use intelkit::nn::{pool, AttentionMode, Packed, ParamStore, Pooling, PoolingScheme};
use intelkit::signal::{plan_folds, AudioClip, CorpusManifest, IntelligibilityClass};
use intelkit::synth::{generate, lhmr, manifest_for, SynthClip, SynthSpec};

fn report(criterion: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{verdict} {criterion}: {details}").unwrap();
    out.flush().unwrap();
    assert!(pass, "{criterion}: {details}");
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn argmax(xs: impl IntoIterator<Item = f64>) -> usize {
    xs.into_iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn nearest(xs: &[f64], target: f64) -> usize {
    argmax(xs.iter().map(|x| -(x - target).abs()))
}

fn tone(freq: f64, amp: f64, secs: f64) -> AudioClip {
    let n = (secs * 16000.0) as usize;
    AudioClip::anonymous((0..n).map(|i| (amp * (2.0 * PI * freq * i as f64 / 16000.0).sin()) as f32).collect()).unwrap()
}

// LSTM with input width d and h cells: four gates, each with input and
// recurrent weights plus a bias.
fn lstm_oracle(d: usize, h: usize) -> usize {
    4 * (d * h + h * h + h)
}

#[test]
fn parameter_counts() {
    let start = Instant::now();
    let lm = ModelConfig::new(ModelKind::SingleLogmel);
    let ms = ModelConfig::new(ModelKind::SingleModspec);
    let wp = ModelConfig::new(ModelKind::WpFusion);
    let got = [
        Model::<f32>::new(lm.clone(), 0).unwrap().lstm_param_count(),
        Model::<f32>::new(ms.clone(), 0).unwrap().lstm_param_count(),
        Model::<f32>::new(wp, 0).unwrap().lstm_param_count(),
    ];
    let oracle = [
        lstm_oracle(lm.logmel.n_dense1, lm.logmel.n_lstm),
        lstm_oracle(ms.modspec.n_dense1, ms.modspec.n_lstm),
        lstm_oracle(32, 64) + lstm_oracle(100, 64),
    ];
    let reference = [24832, 42240, 67072];
    let elapsed = start.elapsed();
    report(
        "parameter counts",
        got == reference && oracle == reference && elapsed < Duration::from_secs(1),
        &format!("lstm {got:?}, oracle {oracle:?}, reference {reference:?}, {}", secs(elapsed)),
    );
}

#[test]
fn relative_complexity() {
    let start = Instant::now();
    let cfg = ModelConfig::new(ModelKind::WpFusion);
    let w_lm = Model::<f32>::new(ModelConfig::new(ModelKind::SingleLogmel), 0).unwrap().lstm_param_count();
    let w_ms = Model::<f32>::new(ModelConfig::new(ModelKind::SingleModspec), 0).unwrap().lstm_param_count();
    let ratio = (w_ms * cfg.modspec.len) as f64 / (w_lm * cfg.logmel.len) as f64;
    let lib_ratio = cfg.modspec.complexity() as f64 / cfg.logmel.complexity() as f64;
    let elapsed = start.elapsed();
    report(
        "relative complexity",
        (0.26..=0.28).contains(&ratio) && lib_ratio == ratio && elapsed < Duration::from_secs(1),
        &format!(
            "W*L {} vs {}, ratio {ratio:.4} (library {lib_ratio:.4}), {}",
            w_ms * cfg.modspec.len,
            w_lm * cfg.logmel.len,
            secs(elapsed)
        ),
    );
}

#[test]
fn gradient_suite() {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut bad = Vec::new();
    let mut checked = 0;
    for kind in ModelKind::ALL {
        for (scheme, mode) in pooling_variants() {
            let mut cfg = toy_config(kind, scheme);
            cfg.pooling.mode = mode;
            let batch = toy_batch(11, &cfg);
            assert_eq!(batch.len(), 2);
            let r = model_gradcheck(&cfg, &batch, 5).unwrap();
            let total = Model::<f64>::new(cfg.clone(), 5).unwrap().count_params();
            checked += r.checked;
            let name = format!("{kind} {scheme}/{mode:?}");
            if r.max_rel_error >= 1e-4 || r.checked + r.kinks != total || r.kinks > 2 {
                bad.push(format!("{name}: {:.3e}, {} kinks", r.max_rel_error, r.kinks));
            }
            if r.max_rel_error > worst.0 {
                worst = (r.max_rel_error, name);
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "gradient suite",
        bad.is_empty() && elapsed < Duration::from_secs(60),
        &format!(
            "max relative error {:.3e} ({}) over {checked} parameters, failures {bad:?}, {}",
            worst.0,
            worst.1,
            secs(elapsed)
        ),
    );
}

fn pooling_case() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<usize>, Vec<f64>)> {
    (1usize..5, 1usize..6).prop_flat_map(|(b, n)| {
        (
            Just(b),
            Just(n),
            prop::collection::vec(-4.0f64..4.0, b * 10 * n),
            prop::collection::vec(1usize..=10, b),
            prop::collection::vec(-3.0f64..3.0, n),
        )
    })
}

fn layer(scheme: PoolingScheme, mode: AttentionMode, n: usize, u: &[f64]) -> (ParamStore<f64>, Pooling) {
    let mut s = ParamStore::new();
    let p = Pooling::new(&mut s, "pool", scheme, mode, n, 10);
    if let Some(id) = p.u {
        s.value_mut(id).copy_from_slice(u);
    }
    (s, p)
}

fn repad(p: &Packed<f64>, extra: usize, fill: f64) -> Packed<f64> {
    let len = p.max_len() + extra;
    let d = p.dim();
    let mut vals = vec![fill; p.batch() * len * d];
    let mut mask = vec![false; p.batch() * len];
    for i in 0..p.batch() {
        for t in 0..p.lengths[i] {
            vals[(i * len + t) * d..(i * len + t + 1) * d].copy_from_slice(p.frame(i, t));
            mask[i * len + t] = true;
        }
    }
    Packed::from_padded(&vals, &mask, p.batch(), len, d).unwrap()
}

#[test]
fn pooling_invariants() {
    let start = Instant::now();
    let cases = 128;
    let mut runner = TestRunner::new(Config::with_cases(cases));
    let weights = runner.run(&pooling_case(), |(b, n, y, lengths, u)| {
        let mask: Vec<bool> = lengths.iter().flat_map(|&l| (0..10).map(move |t| t < l)).collect();
        for (scheme, mode) in pooling_variants() {
            let (s, p) = layer(scheme, mode, n, &u);
            let (_, w) = pool(&y, &mask, b, 10, &p, &s).unwrap();
            for i in 0..b {
                let row = &w[i * 10..(i + 1) * 10];
                prop_assert!(row.iter().all(|&a| a >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(row[lengths[i]..].iter().all(|&a| a == 0.0));
            }
        }
        Ok(())
    });
    let mut runner = TestRunner::new(Config::with_cases(cases));
    let zero_u = runner.run(&pooling_case(), |(b, n, y, lengths, _)| {
        let mask: Vec<bool> = lengths.iter().flat_map(|&l| (0..10).map(move |t| t < l)).collect();
        let (s, att) = layer(PoolingScheme::Attention, AttentionMode::SingleSoftmax, n, &vec![0.0; n]);
        let (za, _) = pool(&y, &mask, b, 10, &att, &s).unwrap();
        // Plain average of the valid frames.
        for i in 0..b {
            for j in 0..n {
                let mean = (0..lengths[i]).map(|t| y[(i * 10 + t) * n + j]).sum::<f64>() / lengths[i] as f64;
                prop_assert!((za.data[i * n + j] - mean).abs() <= 1e-12);
            }
        }
        Ok(())
    });
    let mut runner = TestRunner::new(Config::with_cases(cases));
    let padding = runner.run(&(0u64..10_000, 1usize..16, -1e6f64..1e6), |(seed, extra, fill)| {
        for kind in ModelKind::ALL {
            for (scheme, mode) in pooling_variants() {
                let mut cfg = toy_config(kind, scheme);
                cfg.pooling.mode = mode;
                let batch = toy_batch(seed, &cfg);
                let m = Model::<f64>::new(cfg, seed).unwrap();
                let base = m.loss(&batch).unwrap();
                let padded = Batch {
                    logmel: batch.logmel.as_ref().map(|p| repad(p, extra, fill)),
                    modspec: batch.modspec.as_ref().map(|p| repad(p, extra, fill)),
                    labels: batch.labels.clone(),
                };
                prop_assert!((m.loss(&padded).unwrap() - base).abs() < 1e-9);
            }
        }
        Ok(())
    });
    let elapsed = start.elapsed();
    report(
        "pooling invariants",
        weights.is_ok() && zero_u.is_ok() && padding.is_ok() && elapsed < Duration::from_secs(60),
        &format!(
            "{cases} cases each: distribution {}, zero attention = mean {}, masked padding {}, {}",
            verdict(&weights),
            verdict(&zero_u),
            verdict(&padding),
            secs(elapsed)
        ),
    );
}

fn verdict<E: std::fmt::Display>(r: &Result<(), E>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(e) => e.to_string(),
    }
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

fn erb_number(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

fn inv_erb_number(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

#[test]
fn dsp_oracles() {
    let start = Instant::now();
    let ex = FeatureExtractor::default();
    let mut notes = Vec::new();
    let mut pass = true;

    let seven = tone(700.0, 0.1, 7.0);
    let t_lm = ex.extract(&seven, FeatureKind::Logmel).unwrap().native_frames();
    let t_ms = ex.extract(&seven, FeatureKind::Modulation).unwrap().native_frames();
    pass &= t_lm == 700 && t_ms == 110;
    notes.push(format!("7 s frames {t_lm}/{t_ms}"));

    // 32 triangles with edges uniformly spaced in mel over 0..8000 Hz.
    let step = mel(8000.0) / 33.0;
    let centers: Vec<f64> = (1..=32).map(|i| inv_mel(i as f64 * step)).collect();
    let want = nearest(&centers, 1000.0);
    let lm = ex.extract(&tone(1000.0, 0.5, 1.0), FeatureKind::Logmel).unwrap();
    let wrong = (0..lm.rows())
        .filter(|&t| argmax((0..32).map(|k| lm.at(t, k) as f64)) != want)
        .count();
    pass &= wrong == 0;
    notes.push(format!("1 kHz tone in mel band {want} ({:.0} Hz) on {}/{} frames", centers[want], lm.rows() - wrong, lm.rows()));

    // 23 channels uniformly spaced in ERB number; modulation filters
    // geometrically spaced from 2 to 64 Hz.
    let (lo, hi) = (erb_number(125.0), erb_number(8000.0));
    let gt: Vec<f64> = (0..23).map(|i| inv_erb_number(lo + (hi - lo) * i as f64 / 22.0)).collect();
    let mods: Vec<f64> = (0..8).map(|i| 2.0 * 32f64.powf(i as f64 / 7.0)).collect();
    let lib_mods = modulation_centers(&ex.modspec);
    pass &= mods.iter().zip(&lib_mods).all(|(a, b)| (a - b).abs() < 1e-9);
    let (band, filt) = (nearest(&gt, 1000.0), nearest(&mods, 4.0));
    let n = 3 * 16000;
    let am = AudioClip::anonymous(
        (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                (0.4 * (1.0 + 0.8 * (2.0 * PI * 4.0 * t).cos()) * (2.0 * PI * 1000.0 * t).sin()) as f32
            })
            .collect(),
    )
    .unwrap();
    let ms = ex.extract(&am, FeatureKind::Modulation).unwrap();
    let m = mods.len();
    let total: Vec<f64> = (0..ms.n_features())
        .map(|j| (0..ms.rows()).map(|t| ms.at(t, j) as f64).sum())
        .collect();
    let cell = argmax(total.iter().copied());
    pass &= (cell / m, cell % m) == (band, filt);
    notes.push(format!(
        "AM argmax cell ({:.0} Hz, {:.2} Hz), expected ({:.0} Hz, {:.2} Hz)",
        gt[cell / m],
        mods[cell % m],
        gt[band],
        mods[filt]
    ));

    let n = 16000 + 777;
    let amp = 0.37;
    let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * 523.3 * i as f64 / 16000.0 + 0.4).cos()).collect();
    let env = hilbert_envelope(&x);
    let dev = env[n / 10..n - n / 10]
        .iter()
        .map(|e| (e - amp).abs() / amp)
        .fold(0.0f64, f64::max);
    pass &= dev < 0.01;
    notes.push(format!("tone envelope max deviation {:.3}%", 100.0 * dev));

    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report("DSP oracles", pass, &format!("{}, {}", notes.join("; "), secs(elapsed)));
}

struct Corpus {
    clips: Vec<SynthClip>,
    manifest: CorpusManifest,
    logmel: Vec<FeatureSequence>,
    modspec: Vec<FeatureSequence>,
    featurize_time: Duration,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let spec = SynthSpec::default();
        let clips = generate(&spec).unwrap();
        let manifest = manifest_for(&clips, "synthetic");
        let ex = FeatureExtractor::default();
        let feats: Vec<(FeatureSequence, FeatureSequence)> = clips
            .par_iter()
            .map(|c| {
                let audio = AudioClip::anonymous(c.samples.clone()).unwrap();
                (
                    ex.extract(&audio, FeatureKind::Logmel).unwrap(),
                    ex.extract(&audio, FeatureKind::Modulation).unwrap(),
                )
            })
            .collect();
        let (logmel, modspec) = feats.into_iter().unzip();
        Corpus {
            clips,
            manifest,
            logmel,
            modspec,
            featurize_time: start.elapsed(),
        }
    })
}

fn dataset(c: &Corpus) -> Dataset {
    let prep = |s: &FeatureSequence| pad_or_cut(&normalize_utterance(s), s.kind().default_len());
    Dataset {
        examples: c
            .clips
            .iter()
            .zip(c.logmel.iter().zip(&c.modspec))
            .map(|(clip, (lm, ms))| Example {
                clip_id: clip.clip_id.clone(),
                speaker_id: clip.speaker_id.clone(),
                label: clip.class.index(),
                logmel: Some(prep(lm)),
                modspec: Some(prep(ms)),
            })
            .collect(),
    }
}

#[test]
fn synthetic_end_to_end() {
    let c = corpus();
    assert_eq!(c.clips.len(), 600);
    assert_eq!(c.manifest.speakers().len(), 15);
    let start = Instant::now();
    let data = dataset(c);
    let plan = plan_folds(&c.manifest, 5, 0).unwrap();
    let cfg = TrainConfig {
        repeats: 3,
        ..TrainConfig::default()
    };
    let opts = CvOptions {
        jobs: 0,
        trace_clips: Vec::new(),
    };
    let mut acc: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut lines = Vec::new();
    let mut configs: Vec<(ModelKind, PoolingScheme)> = Vec::new();
    for kind in [ModelKind::SingleLogmel, ModelKind::SingleModspec] {
        for scheme in [PoolingScheme::Attention, PoolingScheme::Mean, PoolingScheme::Last] {
            configs.push((kind, scheme));
        }
    }
    configs.push((ModelKind::WpFusion, PoolingScheme::Attention));
    for (kind, scheme) in configs {
        let t = Instant::now();
        let model = ModelConfig::new(kind).with_pooling(scheme);
        let r = run_cv(&data, &plan, &model, &cfg, &opts).unwrap();
        let epochs: usize = r.folds.iter().map(|f| f.epochs_run).sum();
        let line = format!(
            "{kind} {scheme}: {:.2}% ± {:.2} ({} epochs, {})",
            r.mean_accuracy,
            r.ci95,
            epochs,
            secs(t.elapsed())
        );
        writeln!(std::io::stdout(), "  {line}").unwrap();
        lines.push(line);
        acc.insert((kind.to_string(), scheme.to_string()), r.mean_accuracy);
    }
    let get = |k: &str, s: &str| acc[&(k.to_string(), s.to_string())];
    let mut fails = Vec::new();
    for k in ["single-logmel", "single-modspec"] {
        let (a, m, l) = (get(k, "attention"), get(k, "mean"), get(k, "last"));
        if a < 90.0 {
            fails.push(format!("{k} attention {a:.2}% < 90%"));
        }
        if a < m - 1.0 || m < l - 1.0 {
            fails.push(format!("{k} ordering attention {a:.2} / mean {m:.2} / last {l:.2}"));
        }
    }
    let best_single = get("single-logmel", "attention").max(get("single-modspec", "attention"));
    let wp = get("wp-fusion", "attention");
    if wp < best_single - 0.5 {
        fails.push(format!("wp-fusion {wp:.2}% < best single {best_single:.2}% - 0.5"));
    }
    let elapsed = start.elapsed() + c.featurize_time;
    report(
        "synthetic end-to-end",
        fails.is_empty(),
        &format!(
            "{}; failures {fails:?}; wall time {} incl. features on {} threads (target < 30 min on a laptop)",
            lines.join("; "),
            secs(elapsed),
            rayon::current_num_threads()
        ),
    );
}

#[test]
fn qualitative_modulation_analysis() {
    let c = corpus();
    let centers = modulation_centers(&FeatureExtractor::default().modspec);
    let m = centers.len();
    let by_class = |speaker: &str, class: IntelligibilityClass| -> Vec<f64> {
        c.clips
            .iter()
            .zip(&c.modspec)
            .filter(|(clip, _)| clip.speaker_id == speaker && clip.class == class)
            .map(|(_, s)| lhmr(s, &centers).unwrap_or(f64::INFINITY))
            .collect()
    };
    let (mut wins, mut total) = (0, 0);
    for spk in c.manifest.speakers() {
        let low = by_class(&spk, IntelligibilityClass::Low);
        let high = by_class(&spk, IntelligibilityClass::High);
        for (l, h) in low.iter().zip(&high) {
            total += 1;
            wins += usize::from(l > h);
        }
    }
    let frac = wins as f64 / total as f64;

    // The generator puts the low class near 1.5 Hz and the high class near
    // 4 Hz, and tilts the low class toward low acoustic bands.
    let labels: Vec<IntelligibilityClass> = c.clips.iter().map(|c| c.class).collect();
    let corr = corr_map(&c.modspec, &labels).unwrap();
    let bands = corr.len() / m;
    let col = |j: usize| (0..bands).map(|k| corr[k * m + j]).sum::<f64>() / bands as f64;
    let rows = |r: std::ops::Range<usize>| {
        let n = r.len() * m;
        r.flat_map(|k| corr[k * m..(k + 1) * m].to_vec()).sum::<f64>() / n as f64
    };
    let (c2, c5, c8) = (col(0), col(2), col(3));
    let (bottom, top) = (rows(0..bands / 4), rows(bands - bands / 4..bands));
    let signs = c2 < 0.0 && c5 > 0.0 && c8 > 0.0 && bottom < 0.0 && top > 0.0;
    report(
        "qualitative modulation analysis",
        frac >= 0.9 && signs,
        &format!(
            "low LHMR > high in {wins}/{total} speaker-matched pairs ({:.1}%); mean correlation 2 Hz {c2:+.3}, 5.38 Hz {c5:+.3}, 8.82 Hz {c8:+.3}, low bands {bottom:+.3}, high bands {top:+.3}",
            100.0 * frac
        ),
    );
}

#[test]
fn overfit_probe() {
    let c = corpus();
    let data = dataset(c);
    // Eight clips across three speakers and all classes.
    let picks: Vec<&Example> = data
        .examples
        .iter()
        .filter(|e| ["spk00", "spk01", "spk02"].contains(&e.speaker_id.as_str()))
        .step_by(5)
        .take(8)
        .collect();
    assert_eq!(picks.len(), 8);
    // One update per clip; a single batch of eight leaves the 21-weight
    // late-fusion layer too few steps at the default learning rate.
    let cfg = TrainConfig {
        max_epochs: 200,
        batch_size: 1,
        repeats: 1,
        patience: None,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let results: Vec<(String, f64)> = ModelKind::ALL
        .par_iter()
        .map(|&kind| {
            let out = train(&ModelConfig::new(kind), &picks, &[], &cfg, 1).unwrap();
            (kind.to_string(), train_accuracy(&out.model, &picks).unwrap().accuracy)
        })
        .collect();
    let pass = results.iter().all(|(_, a)| *a == 100.0);
    report(
        "overfit probe",
        pass,
        &format!("train accuracy after 200 epochs {results:?}, {}", secs(start.elapsed())),
    );
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<String> = std::iter::once("intelkit").chain(args.iter().copied()).map(String::from).collect();
    let code = intelkit::cli::main_with(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

fn pipeline(dir: &Path) {
    let d = |p: &str| dir.join(p).to_string_lossy().into_owned();
    let spec = SynthSpec {
        n_speakers: 4,
        clips_per_speaker: 3,
        min_duration: 1.0,
        max_duration: 2.0,
        ..SynthSpec::default()
    };
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(d("spec.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    let manifest = d("corpus/manifest.tsv");
    let feats = d("feats");
    let report = d("cv/report.json");
    let folds = format!("{report}.folds.json");
    let ckpt = d("model.ikck");
    let (spec_path, corpus_dir, eval, att, analysis) =
        (d("spec.json"), d("corpus"), d("eval.json"), d("att"), d("analysis"));
    let small = ["--epochs", "3", "--batch-size", "4", "--lr", "1e-3"];
    let steps: Vec<Vec<&str>> = vec![
        vec!["--seed", "5", "synth", "--spec", &spec_path, "--out", &corpus_dir],
        vec!["featurize", "--kind", "both", "--manifest", &manifest, "--out", &feats],
        [
            &["--seed", "5", "cv", "--manifest", &manifest, "--features", &feats, "--arch", "single-logmel"][..],
            &["--k", "3", "--repeats", "2", "--jobs", "2", "--trace", "spk00_c000", "--out", &report],
            &small,
        ]
        .concat(),
        [
            &["--seed", "5", "train", "--manifest", &manifest, "--features", &feats, "--arch", "wp-fusion"][..],
            &["--folds", &folds, "--rotation", "1", "--out", &ckpt],
            &small,
        ]
        .concat(),
        vec![
            "evaluate", "--manifest", &manifest, "--features", &feats, "--checkpoint", &ckpt, "--folds", &folds,
            "--rotation", "1", "--out", &eval,
        ],
        vec!["attention-export", "--manifest", &manifest, "--checkpoint", &ckpt, "--clip", "spk01_c001", "--out", &att],
        vec!["analyze", "--manifest", &manifest, "--out", &analysis],
    ];
    for s in steps {
        let (code, err) = cli(&s);
        assert_eq!(code, 0, "{s:?}: {err}");
    }
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn comparable(path: &Path, bytes: Vec<u8>) -> Vec<u8> {
    if !path.to_string_lossy().ends_with("provenance.json") {
        return bytes;
    }
    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    v.as_object_mut().unwrap().remove("created_unix");
    serde_json::to_vec(&v).unwrap()
}

#[test]
fn determinism() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path().join("run");
    pipeline(&work);
    let first = tmp.path().join("first");
    std::fs::rename(&work, &first).unwrap();
    pipeline(&work);
    let (a, b) = (files(&first), files(&work));
    let mut differing = Vec::new();
    for f in &a {
        let x = comparable(f, std::fs::read(first.join(f)).unwrap());
        let y = std::fs::read(work.join(f)).map(|y| comparable(f, y)).unwrap_or_default();
        if x != y {
            differing.push(f.display().to_string());
        }
    }
    report(
        "determinism",
        a == b && differing.is_empty() && a.len() > 30,
        &format!(
            "{} output files compared bit-exactly across reruns, differing {differing:?}, {}",
            a.len(),
            secs(start.elapsed())
        ),
    );
}

#[test]
fn held_out_linear_probe() {
    // The compact modulation vector should separate classes for unseen
    // speakers.
    let c = corpus();
    let x: Vec<Vec<f64>> = c.modspec.iter().map(|s| intelkit::features::avg_modspec(s).unwrap()).collect();
    let y: Vec<usize> = c.clips.iter().map(|c| c.class.index()).collect();
    let test_spk = |s: &str| ["spk12", "spk13", "spk14"].contains(&s);
    let d = x[0].len();
    let (mean, std): (Vec<f64>, Vec<f64>) = (0..d)
        .map(|j| {
            let v: Vec<f64> = x.iter().map(|r| r[j]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let s = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt().max(1e-9);
            (m, s)
        })
        .unzip();
    let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|j| (r[j] - mean[j]) / std[j]).collect()).collect();
    // Multinomial logistic regression by full-batch gradient descent.
    let mut w = vec![vec![0.0; d + 1]; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    w.iter_mut().flatten().for_each(|v| *v = rng.gen_range(-0.01..0.01));
    let train: Vec<usize> = (0..z.len()).filter(|&i| !test_spk(&c.clips[i].speaker_id)).collect();
    let scores = |w: &[Vec<f64>], r: &[f64]| -> Vec<f64> {
        w.iter().map(|wc| wc[d] + wc[..d].iter().zip(r).map(|(a, b)| a * b).sum::<f64>()).collect()
    };
    for _ in 0..300 {
        let mut g = vec![vec![0.0; d + 1]; 3];
        for &i in &train {
            let s = scores(&w, &z[i]);
            let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|v| (v - mx).exp()).collect();
            let sum: f64 = e.iter().sum();
            for k in 0..3 {
                let diff = e[k] / sum - f64::from(u8::from(y[i] == k));
                for j in 0..d {
                    g[k][j] += diff * z[i][j];
                }
                g[k][d] += diff;
            }
        }
        for k in 0..3 {
            for j in 0..=d {
                w[k][j] -= 0.5 * g[k][j] / train.len() as f64 + 1e-3 * w[k][j];
            }
        }
    }
    let test: Vec<usize> = (0..z.len()).filter(|&i| test_spk(&c.clips[i].speaker_id)).collect();
    let correct = test.iter().filter(|&&i| argmax(scores(&w, &z[i])) == y[i]).count();
    let acc = 100.0 * correct as f64 / test.len() as f64;
    report(
        "held-out linear probe",
        acc > 80.0,
        &format!("{correct}/{} held-out clips ({acc:.1}%)", test.len()),
    );
}
