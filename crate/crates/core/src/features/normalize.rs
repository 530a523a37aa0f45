use super::FeatureSequence;

/// Sentinel stored in padded rows; the mask, not this value, marks them.
pub const PAD_VALUE: f32 = 0.0;

const STD_EPS: f64 = 1e-8;

/// Per-dimension mean/std normalization over the valid frames.
/// Dimensions with std below 1e-8 are only mean-centered.
pub fn normalize_utterance(seq: &FeatureSequence) -> FeatureSequence {
    let d = seq.n_features();
    let t = seq.valid_frames();
    let mut out = seq.clone();
    if t == 0 {
        return out;
    }
    for f in 0..d {
        let mean = (0..t).map(|i| seq.at(i, f) as f64).sum::<f64>() / t as f64;
        let var = (0..t)
            .map(|i| (seq.at(i, f) as f64 - mean).powi(2))
            .sum::<f64>()
            / t as f64;
        let std = var.sqrt();
        let scale = if std < STD_EPS { 1.0 } else { 1.0 / std };
        for i in 0..t {
            out.values[i * d + f] = ((seq.at(i, f) as f64 - mean) * scale) as f32;
        }
    }
    out
}

/// Cuts or pads to exactly `len` rows, marking padded rows invalid.
pub fn pad_or_cut(seq: &FeatureSequence, len: usize) -> FeatureSequence {
    assert!(len > 0, "padded length must be positive");
    let d = seq.n_features();
    let keep = seq.valid_frames().min(len);
    let mut values = Vec::with_capacity(len * d);
    values.extend_from_slice(&seq.values()[..keep * d]);
    values.resize(len * d, PAD_VALUE);
    let mut mask = vec![true; keep];
    mask.resize(len, false);
    FeatureSequence {
        kind: seq.kind(),
        values,
        mask,
        native_frames: seq.native_frames(),
        n_features: d,
    }
}

#[cfg(test)]
mod tests {
    use super::super::FeatureKind;
    use super::*;
    use proptest::prelude::*;

    fn seq(rows: usize, d: usize, f: impl Fn(usize, usize) -> f32) -> FeatureSequence {
        let v = (0..rows * d).map(|i| f(i / d, i % d)).collect();
        FeatureSequence::new(FeatureKind::Modulation, d, v).unwrap()
    }

    fn stats(s: &FeatureSequence, f: usize) -> (f64, f64) {
        let t = s.valid_frames();
        let m = (0..t).map(|i| s.at(i, f) as f64).sum::<f64>() / t as f64;
        let v = (0..t).map(|i| (s.at(i, f) as f64 - m).powi(2)).sum::<f64>() / t as f64;
        (m, v.sqrt())
    }

    proptest! {
        #[test]
        fn zero_mean_unit_std(rows in 2usize..50, d in 1usize..6, seed in 0u32..1000) {
            let s = seq(rows, d, |t, f| ((t * 31 + f * 17 + seed as usize) % 23) as f32 + 0.1 * t as f32);
            let n = normalize_utterance(&s);
            for f in 0..d {
                let (m, sd) = stats(&n, f);
                prop_assert!(m.abs() < 1e-6);
                prop_assert!((sd - 1.0).abs() < 1e-4);
            }
            let twice = normalize_utterance(&n);
            for (a, b) in twice.values().iter().zip(n.values()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn constant_dimension_goes_to_zero() {
        let s = seq(10, 2, |t, f| if f == 0 { 3.5 } else { t as f32 });
        let n = normalize_utterance(&s);
        assert!((0..10).all(|t| n.at(t, 0) == 0.0));
    }

    #[test]
    fn long_sequences_are_cut() {
        let s = seq(890, 3, |t, f| (t * 3 + f) as f32);
        let p = pad_or_cut(&s, 110);
        assert_eq!(p.rows(), 110);
        assert!(p.mask().iter().all(|&m| m));
        assert_eq!(p.values(), &s.values()[..330]);
        assert_eq!(p.native_frames(), 890);
    }

    #[test]
    fn short_sequences_are_padded() {
        let s = seq(19, 2, |t, _| t as f32 + 1.0);
        let p = pad_or_cut(&s, 110);
        assert_eq!(p.mask().iter().filter(|&&m| m).count(), 19);
        assert!(p.mask()[..19].iter().all(|&m| m));
        assert!(p.mask()[19..].iter().all(|&m| !m));
        assert!(p.values()[38..].iter().all(|&v| v == PAD_VALUE));
        assert_eq!(&p.values()[..38], s.values());
    }

    #[test]
    fn exact_length_is_identity() {
        let s = seq(7, 2, |t, f| (t * f) as f32);
        let p = pad_or_cut(&s, 7);
        assert_eq!(p.values(), s.values());
        assert!(p.mask().iter().all(|&m| m));
    }

    #[test]
    fn normalization_ignores_padding() {
        let s = seq(5, 1, |t, _| t as f32);
        let padded = pad_or_cut(&s, 9);
        let a = normalize_utterance(&padded);
        let b = normalize_utterance(&s);
        assert_eq!(&a.values()[..5], b.values());
        assert!(a.values()[5..].iter().all(|&v| v == PAD_VALUE));
    }
}
